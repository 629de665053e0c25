#pragma once

// Backward Euler-Maruyama for MSDEs:
//
//     X^n + k eta^n = X^{n-1} + k b(X^n) + g(X^{n-1}) dW^n,   eta^n ∈ f(X^n).
//
// The drift is implicit, the noise explicit. Each step solves the inclusion
// x + k f(x) - k b(x) ∋ w through the resolvent of f.

#include "msde/core.hpp"
#include "msde/wiener.hpp"

#include <iosfwd>

namespace msde {

struct StepSolverConfig {
  int outer_max_iters = 200;
  double outer_tol = 1e-12;  ///< on successive iterates, scaled by (1 + |w|)

  void validate() const;
};

struct StepResult {
  Vector x;
  Vector eta;
  int iterations = 0;
  double residual = 0.0;  ///< last successive-iterate difference
};

/// Solves x + k eta - k b(x) = w with eta ∈ f(x) by the fixed point
/// x <- R(w + k b(x), k), a contraction with ratio <= k L_b. With b ≡ 0 this is
/// a single resolvent call. eta is recovered as (w + k b(x) - x) / k.
StepResult resolve_step(const Vector& w, double k, const MonotoneDrift& drift,
                        const LipschitzMap& b, const StepSolverConfig& cfg = {});

/// Same, starting the fixed point at `start` instead of R(w, k).
StepResult resolve_step_from(const Vector& w, double k, const MonotoneDrift& drift,
                             const LipschitzMap& b, const Vector& start,
                             const StepSolverConfig& cfg = {});

/// Scheme output on one path; column n holds the time-t_n values.
struct Trajectory {
  Grid grid;
  Matrix states;       ///< d x (N+1), X^n
  Matrix selections;   ///< d x (N+1), eta^n
  Matrix noise;        ///< d x N, column n-1 holds g(X^{n-1}) dW^n

  Index dim() const { return states.rows(); }
  Index steps() const { return grid.N; }
};

/// Runs the scheme from (x0, eta0) along `path`. Throws SolverError naming the
/// failing step, GateError if L_b k >= 1.
Trajectory run_backward_euler(const ProblemSpec& spec, const BrownianPath& path,
                              const StepSolverConfig& cfg, const Vector& x0, const Vector& eta0);

/// Grid interpolants at time t:
///   x_lin   piecewise linear in X,      x_right = X^n,  x_left = X^{n-1},
///   h_lin   piecewise linear in eta,    g_lin   the interpolated noise sum
/// on (t_{n-1}, t_n]; all take their index-0 values at t = 0.
struct Interpolants {
  Vector x_lin;
  Vector x_right;
  Vector x_left;
  Vector h_lin;
  Vector g_lin;
};

Interpolants eval_interpolants(const Trajectory& traj, double t);

/// CSV with columns t, X_1..X_d, eta_1..eta_d; one row per grid point.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

}  // namespace msde
