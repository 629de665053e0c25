#include "msde/stepper.hpp"

#include "msde/format.hpp"

#include <ostream>
#include <string>

namespace msde {

void StepSolverConfig::validate() const {
  if (outer_max_iters < 1 || !(outer_tol > 0.0)) {
    throw std::invalid_argument("StepSolverConfig: iteration cap and tolerance must be positive");
  }
}

StepResult resolve_step_from(const Vector& w, double k, const MonotoneDrift& drift,
                             const LipschitzMap& b, const Vector& start,
                             const StepSolverConfig& cfg) {
  require_step_size(b.lipschitz, k, StepGate(GateRegime::Solvability));
  StepResult out;
  if (b.identically_zero) {
    out.x = drift.resolvent(w, k);
    out.eta = (w - out.x) / k;
    out.iterations = 1;
    return out;
  }
  const double tol = cfg.outer_tol * (1.0 + w.norm());
  Vector x = start;
  for (int it = 1; it <= cfg.outer_max_iters; ++it) {
    Vector next = drift.resolvent(w + k * b(x), k);
    out.residual = (next - x).norm();
    x = std::move(next);
    out.iterations = it;
    if (out.residual <= tol) {
      out.eta = (w + k * b(x) - x) / k;
      out.x = std::move(x);
      return out;
    }
  }
  throw SolverError("resolve_step: no convergence after " + std::to_string(cfg.outer_max_iters) +
                    " iterations, last residual " + format_double(out.residual));
}

StepResult resolve_step(const Vector& w, double k, const MonotoneDrift& drift,
                        const LipschitzMap& b, const StepSolverConfig& cfg) {
  if (b.identically_zero) return resolve_step_from(w, k, drift, b, w, cfg);
  require_step_size(b.lipschitz, k, StepGate(GateRegime::Solvability));
  return resolve_step_from(w, k, drift, b, drift.resolvent(w, k), cfg);
}

Trajectory run_backward_euler(const ProblemSpec& spec, const BrownianPath& path,
                              const StepSolverConfig& cfg, const Vector& x0, const Vector& eta0) {
  const Grid& grid = path.grid;
  const double k = grid.step();
  require_step_size(spec.b.lipschitz, k, StepGate(GateRegime::Solvability));
  if (std::abs(grid.T - spec.T) > 1e-12 * spec.T) {
    throw std::invalid_argument("run_backward_euler: path horizon does not match the problem");
  }
  if (path.noise_dim() != spec.m) {
    throw std::invalid_argument("run_backward_euler: path noise dimension != m");
  }
  if (x0.size() != spec.d || eta0.size() != spec.d) {
    throw std::invalid_argument("run_backward_euler: initial data must have dimension d");
  }

  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(spec.d, grid.N + 1);
  traj.selections.resize(spec.d, grid.N + 1);
  traj.noise.resize(spec.d, grid.N);
  traj.states.col(0) = x0;
  traj.selections.col(0) = eta0;

  for (Index n = 1; n <= grid.N; ++n) {
    const Vector prev = traj.states.col(n - 1);
    const Vector noise = spec.g.constant ? Vector(*spec.g.constant * path.increment(n))
                                         : Vector(spec.g(prev) * path.increment(n));
    traj.noise.col(n - 1) = noise;
    try {
      StepResult step = resolve_step(prev + noise, k, *spec.drift, spec.b, cfg);
      traj.states.col(n) = step.x;
      traj.selections.col(n) = step.eta;
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.what());
    }
  }
  return traj;
}

Interpolants eval_interpolants(const Trajectory& traj, double t) {
  const Grid& grid = traj.grid;
  const Index n = grid.interval(t);
  Interpolants out;
  if (n == 0) {
    out.x_lin = out.x_right = out.x_left = traj.states.col(0);
    out.h_lin = traj.selections.col(0);
    out.g_lin = Vector::Zero(traj.dim());
    return out;
  }
  const double k = grid.step();
  const double right = (t - grid.time(n - 1)) / k;
  const double left = (grid.time(n) - t) / k;
  out.x_right = traj.states.col(n);
  out.x_left = traj.states.col(n - 1);
  out.x_lin = right * out.x_right + left * out.x_left;
  out.h_lin = right * traj.selections.col(n) + left * traj.selections.col(n - 1);
  out.g_lin = right * traj.noise.col(n - 1);
  for (Index i = 0; i + 1 < n; ++i) out.g_lin += traj.noise.col(i);
  return out;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const Index d = traj.dim();
  out << "t";
  for (Index i = 1; i <= d; ++i) out << ",X_" << i;
  for (Index i = 1; i <= d; ++i) out << ",eta_" << i;
  out << '\n';
  for (Index n = 0; n <= traj.grid.N; ++n) {
    out << format_double(traj.grid.time(n));
    for (Index i = 0; i < d; ++i) out << ',' << format_double(traj.states(i, n));
    for (Index i = 0; i < d; ++i) out << ',' << format_double(traj.selections(i, n));
    out << '\n';
  }
}

}  // namespace msde
