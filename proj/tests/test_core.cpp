#include "msde/core.hpp"
#include "msde/models.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace msde;

TEST(StepGate, FactorsPerRegime) {
  EXPECT_EQ(StepGate(GateRegime::Solvability).factor(), 1.0);
  EXPECT_EQ(StepGate(GateRegime::Apriori).factor(), 5.0);
  EXPECT_EQ(StepGate(GateRegime::Convergence).factor(), 8.0);
  EXPECT_EQ(StepGate::from_factor(5.0).regime(), GateRegime::Apriori);
  EXPECT_THROW(StepGate::from_factor(2.0), std::invalid_argument);
  EXPECT_THROW(StepGate::from_factor(4.0), std::invalid_argument);
}

TEST(StepGate, ZeroLipschitzAlwaysPasses) {
  for (double k : {1e-6, 0.5, 10.0, 1e6}) {
    for (auto r : {GateRegime::Solvability, GateRegime::Apriori, GateRegime::Convergence}) {
      const auto c = validate_step_size(0.0, k, StepGate(r));
      EXPECT_TRUE(c.passed);
      EXPECT_EQ(c.slack, 1.0);
    }
  }
}

TEST(StepGate, BoundaryAndSlack) {
  const auto solv = validate_step_size(1.0, 0.5, StepGate(GateRegime::Solvability));
  EXPECT_TRUE(solv.passed);
  EXPECT_DOUBLE_EQ(solv.slack, 0.5);
  EXPECT_FALSE(validate_step_size(1.0, 0.2, StepGate(GateRegime::Apriori)).passed);
  EXPECT_TRUE(validate_step_size(1.0, 0.1, StepGate(GateRegime::Apriori)).passed);
  EXPECT_FALSE(validate_step_size(1.0, 0.125, StepGate(GateRegime::Convergence)).passed);
  EXPECT_FALSE(validate_step_size(1.0, 1.0, StepGate(GateRegime::Solvability)).passed);
  EXPECT_THROW(validate_step_size(1.0, 0.0, StepGate(GateRegime::Solvability)), std::invalid_argument);
}

TEST(StepGate, StricterRegimeImpliesWeaker) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> L(0.0, 5.0), k(1e-4, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double lb = L(rng), kk = k(rng);
    const bool conv = validate_step_size(lb, kk, StepGate(GateRegime::Convergence)).passed;
    const bool apri = validate_step_size(lb, kk, StepGate(GateRegime::Apriori)).passed;
    const bool solv = validate_step_size(lb, kk, StepGate(GateRegime::Solvability)).passed;
    EXPECT_TRUE(!conv || apri);
    EXPECT_TRUE(!apri || solv);
  }
}

TEST(StepGate, ErrorNamesRegimeAndStep) {
  try {
    require_step_size(1.0, 0.2, StepGate(GateRegime::Convergence));
    FAIL() << "expected GateError";
  } catch (const GateError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("Convergence"), std::string::npos);
    EXPECT_NE(msg.find("k = 0.2"), std::string::npos);
    EXPECT_EQ(e.check().regime, GateRegime::Convergence);
    EXPECT_DOUBLE_EQ(e.check().product, 1.6);
  }
}

TEST(GrowthParams, Validation) {
  EXPECT_NO_THROW(GrowthParams(1.0, 1.0, 0.0, 1.0));
  EXPECT_THROW(GrowthParams(0.5, 1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(GrowthParams(2.0, 0.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(GrowthParams(2.0, 1.0, -1.0, 1.0), std::invalid_argument);
  EXPECT_FALSE(GrowthParams(1.0, 1.0, 0.0, 1.0).conjugate().has_value());
  EXPECT_DOUBLE_EQ(*GrowthParams(3.0, 1.0, 0.0, 1.0).conjugate(), 1.5);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_rng(5, 7, kWienerStream);
  Rng b = make_rng(5, 7, kWienerStream);
  Rng c = make_rng(5, 7, kInitialStream);
  Rng d = make_rng(5, 8, kWienerStream);
  Rng e = make_rng(5ull << 32, 7, kWienerStream);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  EXPECT_NE(x, e());
}

TEST(LipschitzMap, DeclaredConstantHolds) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (const auto& b : {LipschitzMap::linear(0.7), LipschitzMap::sine(-1.3), LipschitzMap::zero(3)}) {
    for (int i = 0; i < 200; ++i) {
      Vector x(3), y(3);
      for (int j = 0; j < 3; ++j) x(j) = n(rng), y(j) = n(rng);
      EXPECT_LE((b(x) - b(y)).norm(), b.lipschitz * (x - y).norm() + 1e-14);
    }
  }
  EXPECT_TRUE(LipschitzMap::zero(2).identically_zero);
  EXPECT_TRUE(LipschitzMap::linear(0.0).identically_zero);
  EXPECT_FALSE(LipschitzMap::sine(0.1).identically_zero);
}

TEST(DiffusionMap, MultiplicativeLipschitzInFrobeniusNorm) {
  const auto g = DiffusionMap::multiplicative(0.4, 3);
  EXPECT_DOUBLE_EQ(g.lipschitz, 0.4 * std::sqrt(3.0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    Vector x(2), y(2);
    x << n(rng), n(rng);
    y << n(rng), n(rng);
    EXPECT_LE((g(x) - g(y)).norm(), g.lipschitz * (x - y).norm() * (1 + 1e-14));
  }
  EXPECT_FALSE(g.constant.has_value());
  EXPECT_TRUE(DiffusionMap::additive(Matrix::Ones(2, 2)).constant.has_value());
}

TEST(ProblemSpec, ValidateChecksShapes) {
  ProblemSpec spec;
  spec.d = 1;
  spec.m = 1;
  spec.drift = make_drift("abs");
  spec.b = LipschitzMap::zero(1);
  spec.g = DiffusionMap::additive(Matrix::Ones(1, 1));
  spec.initial = fixed_initial(Vector::Ones(1));
  EXPECT_NO_THROW(spec.validate());

  auto bad = spec;
  bad.g = DiffusionMap::additive(Matrix::Ones(1, 2));
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.initial = fixed_initial(Vector::Ones(2));
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.T = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(InitialLaw, GaussianMoments) {
  const auto law = gaussian_initial(Vector::Constant(1, 2.0), 0.5);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(9, static_cast<std::uint64_t>(i), kInitialStream);
    const double x = law(rng)(0);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 2.0, 4 * 0.5 / std::sqrt(n));
  EXPECT_NEAR(s2 / n - mean * mean, 0.25, 0.02);
}
