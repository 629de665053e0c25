#pragma once

// Monte Carlo experiments on top of the backward Euler-Maruyama scheme:
// strong errors by self-convergence on coupled Brownian paths, log-log rate
// fits, a priori moment sums and the monotone gap.

#include "msde/core.hpp"
#include "msde/stepper.hpp"
#include "msde/wiener.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace msde {

struct MonteCarloOptions {
  Index paths = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RateRow {
  double k = 0.0;
  double rms_error = 0.0;
  double mc_se = 0.0;
  Index paths = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  ///< NaN when only two rows enter the fit
  Index used_rows = 0;
  std::vector<double> excluded_k;  ///< levels with zero error
};

struct RateTable {
  std::vector<RateRow> rows;  ///< strictly decreasing k
  double k_ref = 0.0;
  double T = 0.0;
  std::optional<RateFit> fit;
  std::vector<GateCheck> gates;
  std::vector<std::string> notes;
};

/// Per-path squared errors, one per level, given the reference-resolution
/// Brownian path. `factors[i]` = k_levels[i] / k_ref.
using CoupledPathError =
    std::function<std::vector<double>(Index path, const BrownianPath& reference,
                                      std::span<const Index> factors)>;

/// Shared coupled-path harness: samples one path per index at k_ref, hands it
/// to `per_path`, and reduces the squared errors in path-index order.
/// rms = sqrt(mean); its standard error comes from the delta method.
RateTable coupled_rate_table(double T, Index m, std::span<const double> k_levels, double k_ref,
                             const MonteCarloOptions& mc, const CoupledPathError& per_path);

/// max_n |X_ref(t_n) - X_k(t_n)| over the coarse grid, in L2 over paths.
RateTable strong_error(const ProblemSpec& spec, std::span<const double> k_levels, double k_ref,
                       const MonteCarloOptions& mc, const StepSolverConfig& cfg = {});

/// Same protocol for the running integrals k sum_{j<=n} eta^j.
RateTable eta_integral_error(const ProblemSpec& spec, std::span<const double> k_levels, double k_ref,
                             const MonteCarloOptions& mc, const StepSolverConfig& cfg = {});

/// OLS fit of log2(rms_error) on log2(k). Needs >= 3 rows; zero-error rows are
/// excluded and listed.
RateFit fit_rate(const RateTable& table);

struct DiagnosticsRow {
  double k = 0.0;
  Estimate max_second_moment;  ///< max_n E|X^n|^2, SE at the maximising n
  Estimate sum_increments;     ///< 1/2 sum_n E|X^n - X^{n-1}|^2
  Estimate coercive_sum;       ///< 2 mu k sum_n E|X^n|^p
  Estimate monotone_gap;       ///< k sum_n E<eta^n - eta^{n-1}, X^n - X^{n-1}>
  Estimate initial_second_moment;  ///< E|X_0|^2
  /// sum_n E|X^n - X^{n-1}|^2 + 4 k sum_n E Phi(X^n); NaN without a potential.
  Estimate potential_lhs;
  std::vector<GateCheck> gates;  ///< Solvability, Apriori, Convergence
};

struct DiagnosticsReport {
  std::vector<DiagnosticsRow> rows;
  GrowthParams growth;
};

struct DiagnosticsOptions {
  /// Constants for the coercive sum; defaults to the drift's own.
  std::optional<GrowthParams> growth;
};

/// Monte Carlo estimates of the a priori quantities at each level. Levels are
/// coupled: paths are sampled at the finest k and coarsened.
DiagnosticsReport apriori_diagnostics(const ProblemSpec& spec, std::span<const double> k_levels,
                                      const MonteCarloOptions& mc, const StepSolverConfig& cfg = {},
                                      const DiagnosticsOptions& opts = {});

/// k sum_i E<eta^i - eta^{i-1}, X^i - X^{i-1}>.
Estimate monotone_gap(const ProblemSpec& spec, double k, const MonteCarloOptions& mc,
                      const StepSolverConfig& cfg = {});

/// Additive-noise gradient-flow bounds, with E0 = E|X_0|^2:
///   moment:    E0 + 2T(Phi(0) + |g0|^2)
///   increments: 2 E0 + 4T(Phi(0) + |g0|^2)
/// Empty unless g is constant and the drift has a potential.
struct LangevinBounds {
  double moment = 0.0;
  double increments = 0.0;
};
std::optional<LangevinBounds> langevin_bounds(const ProblemSpec& spec, double initial_second_moment);

void write_rate_csv(const RateTable& table, std::ostream& out);
void write_diagnostics_csv(const DiagnosticsReport& report, std::ostream& out);

}  // namespace msde
