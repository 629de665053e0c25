#include "msde/models.hpp"
#include "msde/stepper.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace msde;

namespace {

ProblemSpec scalar_problem(const std::string& model, LipschitzMap b, DiffusionMap g, double x0, double T = 1.0) {
  ProblemSpec spec;
  spec.drift = make_drift(model);
  spec.b = std::move(b);
  spec.g = std::move(g);
  spec.initial = fixed_initial(Vector::Constant(1, x0));
  spec.T = T;
  return spec;
}

Vector v1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST(ResolveStep, SignDriftExamples) {
  const auto f = make_drift("abs");
  const auto b = LipschitzMap::zero(1);
  auto r = resolve_step(v1(2.0), 0.5, *f, b);
  EXPECT_DOUBLE_EQ(r.x(0), 1.5);
  EXPECT_DOUBLE_EQ(r.eta(0), 1.0);
  EXPECT_EQ(r.iterations, 1);
  r = resolve_step(v1(0.3), 0.5, *f, b);
  EXPECT_EQ(r.x(0), 0.0);
  EXPECT_DOUBLE_EQ(r.eta(0), 0.6);
}

TEST(ResolveStep, ZeroAndLinearDrift) {
  const auto b = LipschitzMap::zero(2);
  Vector w(2);
  w << 1.0, -2.0;
  const auto z = resolve_step(w, 0.3, *make_drift("zero", 2), b);
  EXPECT_EQ(z.x, w);
  EXPECT_EQ(z.eta, Vector::Zero(2));
  const auto lin = resolve_step(v1(3.0), 0.5, MonotoneLinearDrift(Matrix::Constant(1, 1, 4.0)),
                                LipschitzMap::zero(1));
  EXPECT_NEAR(lin.x(0), 1.0, 1e-15);
}

TEST(ResolveStep, FixedPointWithPerturbation) {
  // x + k x = w + k b x has solution w / (1 + k - k b) for linear f and b.
  const auto f = make_drift("linear");
  const auto b = LipschitzMap::linear(0.5);
  const auto r = resolve_step(v1(2.0), 0.2, *f, b);
  EXPECT_NEAR(r.x(0), 2.0 / (1.0 + 0.2 - 0.1), 1e-12);
  EXPECT_GT(r.iterations, 1);
  const double residual = r.x(0) + 0.2 * r.eta(0) - 2.0 - 0.2 * 0.5 * r.x(0);
  EXPECT_LE(std::abs(residual), 1e-12);
}

TEST(ResolveStep, GateAndConvergenceFailures) {
  const auto f = make_drift("abs");
  EXPECT_THROW(resolve_step(v1(1.0), 1.0, *f, LipschitzMap::linear(1.0)), GateError);
  StepSolverConfig cfg;
  cfg.outer_max_iters = 2;
  EXPECT_THROW(resolve_step(v1(1.0), 0.9, *f, LipschitzMap::sine(1.0), cfg), SolverError);
}

TEST(ResolveStep, UniqueRegardlessOfStart) {
  const auto f = make_drift("power:1.5");
  const auto b = LipschitzMap::sine(2.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const Vector w = v1(n(rng));
    const auto a = resolve_step(w, 0.3, *f, b);
    const auto c = resolve_step_from(w, 0.3, *f, b, v1(n(rng)));
    EXPECT_NEAR(a.x(0), c.x(0), 1e-10);
  }
}

TEST(ResolveStep, LipschitzStability) {
  const auto f = make_drift("abs");
  const auto b = LipschitzMap::sine(1.5);
  const double k = 0.4;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const Vector w1 = v1(n(rng)), w2 = v1(n(rng));
    const double dx = (resolve_step(w1, k, *f, b).x - resolve_step(w2, k, *f, b).x).norm();
    EXPECT_LE(dx, (w1 - w2).norm() / (1.0 - k * b.lipschitz) + 1e-8);
  }
}

TEST(BackwardEuler, SignDriftExtinction) {
  const auto spec = scalar_problem("abs", LipschitzMap::zero(1), DiffusionMap::zero(1, 1), 1.0, 2.0);
  const Grid grid = Grid::from_step(2.0, 0.25);
  const auto path = sample_path(0, 0, grid, 1);
  const auto traj = run_backward_euler(spec, path, {}, v1(1.0), v1(1.0));
  const double expect[] = {1.0, 0.75, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0};
  for (Index n = 0; n <= grid.N; ++n) {
    EXPECT_DOUBLE_EQ(traj.states(0, n), expect[n]) << n;
    if (n >= 1) EXPECT_DOUBLE_EQ(traj.selections(0, n), n <= 4 ? 1.0 : 0.0) << n;
  }
}

TEST(BackwardEuler, LinearImplicitEuler) {
  const auto spec = scalar_problem("linear", LipschitzMap::zero(1), DiffusionMap::zero(1, 1), 1.0);
  const Grid grid(1.0, 10);
  const auto traj = run_backward_euler(spec, sample_path(0, 0, grid, 1), {}, v1(1.0), v1(1.0));
  for (Index n = 0; n <= 10; ++n) EXPECT_NEAR(traj.states(0, n), std::pow(1.1, -double(n)), 1e-15);
}

TEST(BackwardEuler, PureNoiseFollowsBrownianPath) {
  Matrix g0(2, 2);
  g0 << 1.0, 0.5, 0.0, 2.0;
  ProblemSpec spec;
  spec.d = 2;
  spec.m = 2;
  spec.drift = make_drift("zero", 2);
  spec.b = LipschitzMap::zero(2);
  spec.g = DiffusionMap::additive(g0);
  spec.initial = fixed_initial(Vector::Ones(2));
  const Grid grid(1.0, 64);
  const auto path = sample_path(3, 1, grid, 2);
  const auto traj = run_backward_euler(spec, path, {}, Vector::Ones(2), Vector::Zero(2));
  for (Index n = 0; n <= grid.N; ++n) {
    EXPECT_LE((traj.states.col(n) - (Vector::Ones(2) + g0 * path.cumulative(n))).norm(), 1e-13);
  }
}

TEST(BackwardEuler, SchemeResidualAndMonotonePairing) {
  const auto spec = scalar_problem("power:1.5", LipschitzMap::sine(0.8),
                                   DiffusionMap::multiplicative(0.5, 1), 0.7);
  const Grid grid(1.0, 50);
  const auto path = sample_path(7, 0, grid, 1);
  const auto traj = run_backward_euler(spec, path, {}, v1(0.7), spec.drift->selection(v1(0.7)));
  const double k = grid.step();
  for (Index n = 1; n <= grid.N; ++n) {
    const double x = traj.states(0, n), xp = traj.states(0, n - 1);
    const double res = x + k * traj.selections(0, n) - xp - k * 0.8 * std::sin(x) -
                       0.5 * xp * path.increment(n)(0);
    EXPECT_LE(std::abs(res), 1e-11);
    EXPECT_GE((traj.selections(0, n) - traj.selections(0, n - 1)) * (x - xp), -1e-12);
  }
}

TEST(BackwardEuler, InterpolantIdentity) {
  // X_lin(t) = x0 + int_0^t (b(X_right) - H_right) ds + G_lin(t)
  const auto spec = scalar_problem("abs", LipschitzMap::sine(0.5), DiffusionMap::multiplicative(0.3, 1), 1.0);
  const Grid grid(1.0, 40);
  const double k = grid.step();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (std::uint64_t p = 0; p < 5; ++p) {
    const auto path = sample_path(11, p, grid, 1);
    const auto traj = run_backward_euler(spec, path, {}, v1(1.0), v1(1.0));
    for (int i = 0; i < 10; ++i) {
      const double t = ut(rng);
      const Index n = grid.interval(t);
      double integral = 0.0;
      for (Index j = 1; j < n; ++j) {
        integral += k * (0.5 * std::sin(traj.states(0, j)) - traj.selections(0, j));
      }
      const double tail = t - grid.time(n - 1);
      integral += tail * (0.5 * std::sin(traj.states(0, n)) - traj.selections(0, n));
      const auto ip = eval_interpolants(traj, t);
      EXPECT_NEAR(ip.x_lin(0), 1.0 + integral + ip.g_lin(0), 1e-10);
    }
  }
}

TEST(Interpolants, KnotsAndMidpoints) {
  const auto spec = scalar_problem("linear", LipschitzMap::zero(1), DiffusionMap::additive(Matrix::Ones(1, 1)), 2.0);
  const Grid grid(1.0, 8);
  const auto traj = run_backward_euler(spec, sample_path(1, 1, grid, 1), {}, v1(2.0), v1(2.0));
  for (Index n = 1; n <= 8; ++n) {
    const auto at = eval_interpolants(traj, grid.time(n));
    EXPECT_DOUBLE_EQ(at.x_lin(0), traj.states(0, n));
    EXPECT_EQ(at.x_right(0), traj.states(0, n));
    EXPECT_EQ(at.x_left(0), traj.states(0, n - 1));
    const auto mid = eval_interpolants(traj, grid.time(n) - 0.5 * grid.step());
    EXPECT_NEAR(mid.x_lin(0), 0.5 * (traj.states(0, n - 1) + traj.states(0, n)), 1e-15);
    EXPECT_NEAR(mid.h_lin(0), 0.5 * (traj.selections(0, n - 1) + traj.selections(0, n)), 1e-15);
  }
  const auto zero = eval_interpolants(traj, 0.0);
  EXPECT_EQ(zero.x_lin(0), 2.0);
  EXPECT_EQ(zero.g_lin(0), 0.0);
}

TEST(BackwardEuler, RejectsMismatchedInputs) {
  const auto spec = scalar_problem("abs", LipschitzMap::zero(1), DiffusionMap::zero(1, 1), 1.0);
  EXPECT_THROW(run_backward_euler(spec, sample_path(0, 0, Grid(2.0, 4), 1), {}, v1(1.0), v1(1.0)),
               std::invalid_argument);
  EXPECT_THROW(run_backward_euler(spec, sample_path(0, 0, Grid(1.0, 4), 2), {}, v1(1.0), v1(1.0)),
               std::invalid_argument);
  const auto stiff = scalar_problem("abs", LipschitzMap::linear(8.0), DiffusionMap::zero(1, 1), 1.0);
  EXPECT_THROW(run_backward_euler(stiff, sample_path(0, 0, Grid(1.0, 4), 1), {}, v1(1.0), v1(1.0)),
               GateError);
}

TEST(BackwardEuler, TrajectoryCsv) {
  const auto spec = scalar_problem("linear", LipschitzMap::zero(1), DiffusionMap::zero(1, 1), 1.0);
  const auto traj = run_backward_euler(spec, sample_path(0, 0, Grid(1.0, 2), 1), {}, v1(1.0), v1(1.0));
  std::ostringstream os;
  write_trajectory_csv(traj, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,X_1,eta_1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
