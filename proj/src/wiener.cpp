#include "msde/wiener.hpp"

#include "msde/stats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace msde {

Grid::Grid(double T_, Index N_) : T(T_), N(N_) {
  if (!(T > 0.0) || N < 1) throw std::invalid_argument("Grid: need T > 0 and N >= 1");
}

Grid Grid::from_step(double T, double k) {
  if (!(k > 0.0) || !(T > 0.0)) throw std::invalid_argument("Grid: step and horizon must be positive");
  const double ratio = T / k;
  const auto N = static_cast<Index>(std::llround(ratio));
  if (N < 1 || std::abs(ratio - static_cast<double>(N)) > 1e-9 * ratio) {
    throw std::invalid_argument("Grid: T / k = " + std::to_string(ratio) + " is not an integer");
  }
  return Grid(T, N);
}

Index Grid::interval(double t) const {
  if (t < 0.0 || t > T) throw std::out_of_range("Grid: t outside [0, T]");
  if (t == 0.0) return 0;
  auto n = static_cast<Index>(std::ceil(t / step()));
  n = std::clamp<Index>(n, 1, N);
  while (n > 1 && t <= time(n - 1)) --n;
  while (n < N && t > time(n)) ++n;
  return n;
}

Vector BrownianPath::cumulative(Index n) const {
  if (n < 0 || n > grid.N) throw std::out_of_range("BrownianPath: knot index outside 0..N");
  return knots.row(n).transpose();
}

namespace {

BrownianPath::Increments knots_from(const BrownianPath::Increments& inc) {
  BrownianPath::Increments knots(inc.rows() + 1, inc.cols());
  knots.row(0).setZero();
  for (Index n = 0; n < inc.rows(); ++n) knots.row(n + 1) = knots.row(n) + inc.row(n);
  return knots;
}

}  // namespace

BrownianPath make_path(const Grid& grid, BrownianPath::Increments increments) {
  if (increments.rows() != grid.N) throw std::invalid_argument("make_path: increment rows != N");
  BrownianPath path;
  path.grid = grid;
  path.knots = knots_from(increments);
  path.increments = std::move(increments);
  return path;
}

BrownianPath sample_path(std::uint64_t seed, std::uint64_t path_index, const Grid& grid, Index m) {
  if (m < 1) throw std::invalid_argument("sample_path: m must be positive");
  Rng rng = make_rng(seed, path_index, kWienerStream);
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.step()));
  BrownianPath::Increments inc(grid.N, m);
  for (Index n = 0; n < grid.N; ++n) {
    for (Index j = 0; j < m; ++j) inc(n, j) = normal(rng);
  }
  BrownianPath path = make_path(grid, std::move(inc));
  path.seed = seed;
  path.path_index = path_index;
  return path;
}

BrownianPath coarsen(const BrownianPath& path, Index factor) {
  if (factor < 1 || path.grid.N % factor != 0) {
    throw std::invalid_argument("coarsen: factor must divide N");
  }
  const Index Nc = path.grid.N / factor;
  BrownianPath out;
  out.grid = Grid(path.grid.T, Nc);
  out.seed = path.seed;
  out.path_index = path.path_index;
  out.increments.resize(Nc, path.noise_dim());
  out.knots.resize(Nc + 1, path.noise_dim());
  for (Index n = 0; n < Nc; ++n) {
    out.increments.row(n) = path.increments.row(n * factor);
    for (Index j = 1; j < factor; ++j) out.increments.row(n) += path.increments.row(n * factor + j);
  }
  for (Index n = 0; n <= Nc; ++n) out.knots.row(n) = path.knots.row(n * factor);
  return out;
}

Vector interpolant_eval(const BrownianPath& path, double t) {
  const Index n = path.grid.interval(t);
  if (n == 0) return Vector::Zero(path.noise_dim());
  const double k = path.grid.step();
  const double right = (t - path.grid.time(n - 1)) / k;
  const double left = (path.grid.time(n) - t) / k;
  // Convex-combination form keeps Wlin(t_n) == W(t_n) bit-exactly.
  return (right * path.knots.row(n) + left * path.knots.row(n - 1)).transpose();
}

void write_increments(const BrownianPath& path, std::ostream& out) {
  static_assert(sizeof(double) == 8);
  for (Index n = 0; n < path.increments.rows(); ++n) {
    for (Index j = 0; j < path.increments.cols(); ++j) {
      auto bits = std::bit_cast<std::uint64_t>(path.increments(n, j));
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
  }
}

BrownianPath::Increments read_increments(std::istream& in, Index N, Index m) {
  BrownianPath::Increments inc(N, m);
  for (Index n = 0; n < N; ++n) {
    for (Index j = 0; j < m; ++j) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
        throw std::runtime_error("read_increments: truncated input");
      }
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      inc(n, j) = std::bit_cast<double>(bits);
    }
  }
  return inc;
}

double interpolation_error_exact(const Matrix& g0, const Grid& grid) {
  return grid.T * g0.squaredNorm() * grid.step() / 6.0;
}

Estimate interpolation_error_mc(const Matrix& g0, const Grid& grid, Index paths,
                                std::uint64_t seed, const InterpolationCheckOptions& opts) {
  if (paths < 2) throw std::invalid_argument("interpolation_error_mc: need at least 2 paths");
  const Index r = opts.fine_factor;
  if (r < 1) throw std::invalid_argument("interpolation_error_mc: fine_factor must be positive");
  if (opts.quadrature == Quadrature::Simpson && r % 2 != 0) {
    throw std::invalid_argument("interpolation_error_mc: Simpson needs an even fine_factor");
  }
  const Index m = g0.cols();
  const Grid fine(grid.T, grid.N * r);
  const double h = fine.step();

  std::vector<double> weights(static_cast<std::size_t>(r + 1));
  for (Index j = 0; j <= r; ++j) {
    if (opts.quadrature == Quadrature::Trapezoid) {
      weights[j] = (j == 0 || j == r) ? 0.5 * h : h;
    } else {
      weights[j] = (j == 0 || j == r) ? h / 3.0 : (j % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    }
  }

  auto per_path = [&](Index p) {
    const BrownianPath fine_path = sample_path(seed, static_cast<std::uint64_t>(p), fine, m);
    const BrownianPath coarse = coarsen(fine_path, r);
    KahanSum integral;
    for (Index n = 1; n <= grid.N; ++n) {
      for (Index j = 0; j <= r; ++j) {
        const double s = static_cast<double>(j) / static_cast<double>(r);
        const Eigen::RowVectorXd lin =
            s * coarse.knots.row(n) + (1.0 - s) * coarse.knots.row(n - 1);
        const Eigen::RowVectorXd diff = fine_path.knots.row((n - 1) * r + j) - lin;
        integral.add(weights[j] * (g0 * diff.transpose()).squaredNorm());
      }
    }
    return integral.value();
  };

  const std::vector<double> values = parallel_map(paths, opts.threads, per_path);
  return mean_and_se(values);
}

}  // namespace msde
