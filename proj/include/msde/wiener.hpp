#pragma once

// Brownian increments on equidistant grids, exact coarsening for coupled
// fine/coarse simulations, and the piecewise linear interpolant of W.

#include "msde/core.hpp"

#include <iosfwd>

namespace msde {

/// Equidistant partition 0 = t_0 < ... < t_N = T with k = T/N.
struct Grid {
  double T = 1.0;
  Index N = 1;

  Grid() = default;
  Grid(double T_, Index N_);

  /// Grid with step k; throws unless T/k is an integer (to 1e-9 relative).
  static Grid from_step(double T, double k);

  double step() const { return T / static_cast<double>(N); }
  double time(Index n) const { return n == N ? T : static_cast<double>(n) * step(); }

  /// Index n with t in (t_{n-1}, t_n]; 0 for t == 0.
  Index interval(double t) const;
};

/// m-dimensional Wiener increments dW^n = W(t_n) - W(t_{n-1}), n = 1..N,
/// stored row-major as [step][component], together with the knot values
/// W(t_n). Knots are accumulated left to right once, at sampling time, and
/// coarsening subsamples them, so coupled paths agree on shared knots
/// bit-exactly.
struct BrownianPath {
  using Increments = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Grid grid;
  Increments increments;  ///< N x m
  Increments knots;       ///< (N+1) x m, row 0 is zero
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  Index noise_dim() const { return increments.cols(); }

  /// Increment dW^n for n in 1..N.
  Vector increment(Index n) const { return increments.row(n - 1).transpose(); }

  /// W(t_n); the left-to-right sum of the first n fine-level increments.
  Vector cumulative(Index n) const;
};

/// Path from explicit increments (knots accumulated left to right).
BrownianPath make_path(const Grid& grid, BrownianPath::Increments increments);

BrownianPath sample_path(std::uint64_t seed, std::uint64_t path_index, const Grid& grid, Index m);

/// Sums consecutive blocks of `factor` increments left to right.
BrownianPath coarsen(const BrownianPath& path, Index factor);

/// Piecewise linear interpolant of W on the path's grid.
Vector interpolant_eval(const BrownianPath& path, double t);

/// Raw little-endian float64 dump of the increments, row-major [step][component].
void write_increments(const BrownianPath& path, std::ostream& out);
BrownianPath::Increments read_increments(std::istream& in, Index N, Index m);

enum class Quadrature { Trapezoid, Simpson };

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct InterpolationCheckOptions {
  Index fine_factor = 32;
  Quadrature quadrature = Quadrature::Simpson;
  unsigned threads = 1;
};

/// Monte Carlo estimate of int_0^T E|g0 (W(t) - Wlin(t))|^2 dt, where W is
/// resolved on a grid `fine_factor` times finer than `grid`. The exact value
/// is T |g0|^2 k / 6.
///
/// The trapezoid rule on the fine grid has expectation (1 - 1/r^2) times the
/// exact value for refinement r; Simpson's rule (r even) is exact in
/// expectation because E|W - Wlin|^2 is quadratic on each coarse interval.
Estimate interpolation_error_mc(const Matrix& g0, const Grid& grid, Index paths,
                                std::uint64_t seed, const InterpolationCheckOptions& opts = {});

/// T |g0|_F^2 k / 6.
double interpolation_error_exact(const Matrix& g0, const Grid& grid);

}  // namespace msde
