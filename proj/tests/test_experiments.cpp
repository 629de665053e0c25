#include "msde/experiments.hpp"
#include "msde/models.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace msde;

namespace {

ProblemSpec scalar_problem(const std::string& model, double g0, double x0) {
  ProblemSpec spec;
  spec.drift = make_drift(model);
  spec.b = LipschitzMap::zero(1);
  spec.g = g0 == 0.0 ? DiffusionMap::zero(1, 1) : DiffusionMap::additive(Matrix::Constant(1, 1, g0));
  spec.initial = fixed_initial(Vector::Constant(1, x0));
  return spec;
}

RateTable table_from(const std::vector<double>& ks, const std::vector<double>& errs) {
  RateTable t;
  for (std::size_t i = 0; i < ks.size(); ++i) t.rows.push_back({ks[i], errs[i], 0.0, 1});
  return t;
}

const std::vector<double> kLevels{1.0 / 8, 1.0 / 16, 1.0 / 32};

}  // namespace

TEST(FitRate, ExactPowerLaws) {
  const std::vector<double> ks{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> lin, flat;
  for (double k : ks) lin.push_back(3.0 * k), flat.push_back(0.7);
  const auto a = fit_rate(table_from(ks, lin));
  EXPECT_NEAR(a.slope, 1.0, 1e-12);
  EXPECT_NEAR(a.intercept, std::log2(3.0), 1e-12);
  EXPECT_NEAR(a.slope_se, 0.0, 1e-10);
  EXPECT_NEAR(fit_rate(table_from(ks, flat)).slope, 0.0, 1e-12);
}

TEST(FitRate, NoisyHalfOrder) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> ks, errs;
  for (int j = 2; j <= 8; ++j) {
    ks.push_back(std::ldexp(1.0, -j));
    errs.push_back(0.4 * std::sqrt(ks.back()) * (1.0 + noise(rng)));
  }
  const auto fit = fit_rate(table_from(ks, errs));
  EXPECT_NEAR(fit.slope, 0.5, 0.05);
  EXPECT_GT(fit.slope_se, 0.0);
}

TEST(FitRate, ZeroRowsExcludedAndTooFewRowsRejected) {
  const auto fit = fit_rate(table_from({0.1, 0.05, 0.025}, {0.2, 0.1, 0.0}));
  EXPECT_EQ(fit.used_rows, 2);
  ASSERT_EQ(fit.excluded_k.size(), 1u);
  EXPECT_EQ(fit.excluded_k[0], 0.025);
  EXPECT_NEAR(fit.slope, 1.0, 1e-12);
  EXPECT_TRUE(std::isnan(fit.slope_se));
  EXPECT_THROW(fit_rate(table_from({0.1, 0.05}, {0.2, 0.1})), std::invalid_argument);
  EXPECT_THROW(fit_rate(table_from({0.1, 0.05, 0.02}, {0.2, 0.0, 0.0})), std::invalid_argument);
}

TEST(CoupledRateTable, SyntheticHalfOrder) {
  // Per-path error C sqrt(k) |Z| with E Z^2 = 1 gives rms C sqrt(k).
  const std::vector<double> ks{1.0 / 4, 1.0 / 16, 1.0 / 64, 1.0 / 256};
  auto per_path = [&](Index, const BrownianPath& ref, std::span<const Index> factors) {
    const double z = ref.cumulative(ref.grid.N)(0);  // N(0, T)
    std::vector<double> out;
    for (Index f : factors) out.push_back(0.3 * 0.3 * f * ref.grid.step() * z * z);
    return out;
  };
  const auto t = coupled_rate_table(1.0, 1, ks, 1.0 / 1024, {4000, 5, 1}, per_path);
  ASSERT_TRUE(t.fit);
  EXPECT_NEAR(t.fit->slope, 0.5, 1e-12);
  for (const auto& row : t.rows) EXPECT_NEAR(row.rms_error, 0.3 * std::sqrt(row.k), 5 * row.mc_se);
  EXPECT_FALSE(t.notes.empty());
}

TEST(CoupledRateTable, InputValidation) {
  auto none = [](Index, const BrownianPath&, std::span<const Index> f) {
    return std::vector<double>(f.size(), 0.0);
  };
  const std::vector<double> increasing{0.1, 0.2};
  EXPECT_THROW(coupled_rate_table(1.0, 1, increasing, 0.05, {10, 0, 1}, none), std::invalid_argument);
  const std::vector<double> ok{0.2, 0.1};
  EXPECT_THROW(coupled_rate_table(1.0, 1, ok, 0.3, {10, 0, 1}, none), std::invalid_argument);
  EXPECT_THROW(coupled_rate_table(1.0, 1, ok, 0.03, {10, 0, 1}, none), std::invalid_argument);
  EXPECT_THROW(coupled_rate_table(1.0, 1, ok, 0.05, {1, 0, 1}, none), std::invalid_argument);
}

TEST(StrongError, PureNoiseHasZeroError) {
  const auto spec = scalar_problem("zero", 1.3, 0.5);
  const auto t = strong_error(spec, kLevels, 1.0 / 256, {200, 3, 1});
  for (const auto& row : t.rows) EXPECT_LE(row.rms_error, 1e-13);
}

TEST(StrongError, ReferenceLevelComparedWithItself) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const std::vector<double> ks{1.0 / 8, 1.0 / 64};
  const auto t = strong_error(spec, ks, 1.0 / 64, {50, 1, 1});
  EXPECT_EQ(t.rows[1].rms_error, 0.0);
  EXPECT_EQ(t.rows[1].mc_se, 0.0);
  EXPECT_GT(t.rows[0].rms_error, 0.0);
}

TEST(StrongError, ThreadCountInvariant) {
  const auto spec = scalar_problem("power:1.5", 1.0, 1.0);
  const auto a = strong_error(spec, kLevels, 1.0 / 256, {300, 9, 1});
  const auto b = strong_error(spec, kLevels, 1.0 / 256, {300, 9, 4});
  std::ostringstream sa, sb;
  write_rate_csv(a, sa);
  write_rate_csv(b, sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(StrongError, StandardErrorScalesWithPaths) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const auto a = strong_error(spec, kLevels, 1.0 / 128, {500, 21, 1});
  const auto b = strong_error(spec, kLevels, 1.0 / 128, {2000, 21, 1});
  for (std::size_t i = 0; i < kLevels.size(); ++i) {
    EXPECT_NEAR(b.rows[i].mc_se / a.rows[i].mc_se, 0.5, 0.15);
  }
}

TEST(StrongError, EnforcesConvergenceGate) {
  auto spec = scalar_problem("abs", 1.0, 1.0);
  spec.b = LipschitzMap::sine(1.0);
  try {
    strong_error(spec, kLevels, 1.0 / 256, {10, 0, 1});
    FAIL();
  } catch (const GateError& e) {
    EXPECT_EQ(e.check().regime, GateRegime::Convergence);
    EXPECT_EQ(e.check().k, 1.0 / 8);
  }
}

TEST(StrongError, CsvHeader) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const auto t = strong_error(spec, kLevels, 1.0 / 64, {20, 0, 1});
  std::ostringstream os;
  write_rate_csv(t, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "k,rms_error,mc_se,paths");
}

TEST(EtaIntegral, ZeroDriftGivesZero) {
  const auto t = eta_integral_error(scalar_problem("zero", 1.0, 1.0), kLevels, 1.0 / 128, {100, 0, 1});
  for (const auto& row : t.rows) EXPECT_EQ(row.rms_error, 0.0);
}

TEST(EtaIntegral, LinearDriftTracksStateRate) {
  // With eta = A X the running integral inherits the state error order.
  const auto spec = scalar_problem("linear", 1.0, 1.0);
  const std::vector<double> ks{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  const auto eta = eta_integral_error(spec, ks, 1.0 / 2048, {1000, 2, 1});
  const auto state = strong_error(spec, ks, 1.0 / 2048, {1000, 2, 1});
  ASSERT_TRUE(eta.fit && state.fit);
  EXPECT_NEAR(eta.fit->slope, state.fit->slope, 0.15);
}

TEST(EtaIntegral, SignDriftLowerBound) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const std::vector<double> ks{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  const auto t = eta_integral_error(spec, ks, 1.0 / 2048, {1000, 3, 1});
  ASSERT_TRUE(t.fit);
  EXPECT_GE(t.fit->slope, 0.15);
}

TEST(Diagnostics, DeterministicClosedForms) {
  const auto spec = scalar_problem("zero", 0.0, 1.5);
  DiagnosticsOptions opts;
  opts.growth = GrowthParams(3.0, 0.5, 0.0, 1.0);
  const auto report = apriori_diagnostics(spec, kLevels, {20, 0, 1}, {}, opts);
  for (const auto& row : report.rows) {
    const double N = 1.0 / row.k;
    EXPECT_DOUBLE_EQ(row.max_second_moment.mean, 2.25);
    EXPECT_EQ(row.sum_increments.mean, 0.0);
    EXPECT_NEAR(row.coercive_sum.mean, 2.0 * 0.5 * row.k * N * std::pow(1.5, 3.0), 1e-12);
    EXPECT_EQ(row.monotone_gap.mean, 0.0);
    EXPECT_EQ(row.gates.size(), 3u);
  }
  EXPECT_THROW(apriori_diagnostics(spec, kLevels, {20, 0, 1}), std::invalid_argument);
}

TEST(Diagnostics, LangevinBoundAndStability) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const std::vector<double> ks{1.0 / 16, 1.0 / 32, 1.0 / 64};
  const auto report = apriori_diagnostics(spec, ks, {2000, 4, 1});
  const auto bound = langevin_bounds(spec, 1.0);
  ASSERT_TRUE(bound);
  EXPECT_DOUBLE_EQ(bound->increments, 6.0);
  EXPECT_DOUBLE_EQ(bound->moment, 3.0);
  for (const auto& row : report.rows) {
    EXPECT_LE(row.potential_lhs.mean, bound->increments + 3 * row.potential_lhs.se);
    EXPECT_LE(row.max_second_moment.mean, bound->moment + 3 * row.max_second_moment.se);
  }
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& c = report.rows[i - 1];
    const auto& f = report.rows[i];
    EXPECT_LE(f.max_second_moment.mean, 1.1 * c.max_second_moment.mean + 3 * f.max_second_moment.se);
    EXPECT_LE(f.sum_increments.mean, 1.1 * c.sum_increments.mean + 3 * f.sum_increments.se);
    EXPECT_LE(f.coercive_sum.mean, 1.1 * c.coercive_sum.mean + 3 * f.coercive_sum.se);
  }
  std::ostringstream os;
  write_diagnostics_csv(report, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "k,max_second_moment,sum_increments,coercive_sum,monotone_gap,gap_se");
}

TEST(Diagnostics, EnforcesAprioriGate) {
  auto spec = scalar_problem("abs", 1.0, 1.0);
  spec.b = LipschitzMap::linear(2.0);
  const std::vector<double> ks{0.125};  // 5 * 2 * 0.125 >= 1 > 2 * 0.125
  try {
    apriori_diagnostics(spec, ks, {10, 0, 1});
    FAIL();
  } catch (const GateError& e) {
    EXPECT_EQ(e.check().regime, GateRegime::Apriori);
  }
}

TEST(MonotoneGap, ZeroDriftAndNonnegativity) {
  EXPECT_EQ(monotone_gap(scalar_problem("zero", 1.0, 1.0), 1.0 / 16, {100, 0, 1}).mean, 0.0);
  for (auto model : {"abs", "power:1.5", "power:3", "linear"}) {
    const auto gap = monotone_gap(scalar_problem(model, 1.0, 1.0), 1.0 / 32, {500, 5, 1});
    EXPECT_GE(gap.mean, -3 * gap.se) << model;
  }
}

TEST(MonotoneGap, SignDriftDecay) {
  const auto spec = scalar_problem("abs", 1.0, 1.0);
  const auto coarse = monotone_gap(spec, 1.0 / 16, {2000, 6, 1});
  const auto fine = monotone_gap(spec, 1.0 / 64, {2000, 6, 1});
  EXPECT_LE(fine.mean, 0.5 * coarse.mean + 3 * fine.se);
}

TEST(LangevinBounds, RequireAdditiveNoiseAndPotential) {
  auto spec = scalar_problem("abs", 1.0, 1.0);
  spec.g = DiffusionMap::multiplicative(1.0, 1);
  EXPECT_FALSE(langevin_bounds(spec, 1.0));
}
