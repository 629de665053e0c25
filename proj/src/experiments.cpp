#include "msde/experiments.hpp"

#include "msde/format.hpp"
#include "msde/stats.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace msde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Index integer_ratio(double coarse, double fine, const char* what) {
  const double ratio = coarse / fine;
  const auto r = static_cast<Index>(std::llround(ratio));
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
    throw std::invalid_argument(std::string(what) + ": step " + format_double(coarse) +
                                " is not an integer multiple of " + format_double(fine));
  }
  return r;
}

void require_decreasing(std::span<const double> k_levels) {
  if (k_levels.empty()) throw std::invalid_argument("at least one step size level is required");
  for (std::size_t i = 1; i < k_levels.size(); ++i) {
    if (!(k_levels[i] < k_levels[i - 1])) {
      throw std::invalid_argument("step size levels must be strictly decreasing");
    }
  }
}

std::vector<GateCheck> all_gates(const ProblemSpec& spec, double k) {
  return {validate_step_size(spec, k, StepGate(GateRegime::Solvability)),
          validate_step_size(spec, k, StepGate(GateRegime::Apriori)),
          validate_step_size(spec, k, StepGate(GateRegime::Convergence))};
}

struct PathStart {
  Vector x0;
  Vector eta0;
};

PathStart initial_state(const ProblemSpec& spec, std::uint64_t seed, Index path) {
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(path), kInitialStream);
  PathStart s;
  s.x0 = spec.initial(rng);
  s.eta0 = spec.drift->selection(s.x0);
  return s;
}

Trajectory run_level(const ProblemSpec& spec, const BrownianPath& path, const StepSolverConfig& cfg,
                     const PathStart& start, Index path_index) {
  try {
    return run_backward_euler(spec, path, cfg, start.x0, start.eta0);
  } catch (const SolverError& e) {
    throw SolverError("path " + std::to_string(path_index) + ", k = " +
                      format_double(path.grid.step()) + ": " + e.what());
  }
}

/// Running integrals k sum_{j<=n} eta^j, column n.
Matrix running_eta_integral(const Trajectory& traj) {
  const double k = traj.grid.step();
  Matrix out(traj.dim(), traj.grid.N + 1);
  out.col(0).setZero();
  for (Index n = 1; n <= traj.grid.N; ++n) out.col(n) = out.col(n - 1) + k * traj.selections.col(n);
  return out;
}

void check_convergence_gates(const ProblemSpec& spec, std::span<const double> k_levels, double k_ref,
                             RateTable& table) {
  for (double k : k_levels) {
    const GateCheck c = validate_step_size(spec, k, StepGate(GateRegime::Convergence));
    table.gates.push_back(c);
    if (!c.passed) throw GateError(c);
  }
  const GateCheck c = validate_step_size(spec, k_ref, StepGate(GateRegime::Convergence));
  table.gates.push_back(c);
  if (!c.passed) throw GateError(c);
}

}  // namespace

RateTable coupled_rate_table(double T, Index m, std::span<const double> k_levels, double k_ref,
                             const MonteCarloOptions& mc, const CoupledPathError& per_path) {
  require_decreasing(k_levels);
  if (mc.paths < 2) throw std::invalid_argument("coupled_rate_table: need at least 2 paths");
  if (!(k_ref > 0.0) || k_ref > k_levels.back()) {
    throw std::invalid_argument("coupled_rate_table: k_ref must not exceed the finest level");
  }
  const Grid ref_grid = Grid::from_step(T, k_ref);
  std::vector<Index> factors;
  for (double k : k_levels) factors.push_back(integer_ratio(k, k_ref, "coupled_rate_table"));

  auto work = [&](Index p) {
    const BrownianPath ref = sample_path(mc.seed, static_cast<std::uint64_t>(p), ref_grid, m);
    std::vector<double> errs = per_path(p, ref, factors);
    if (errs.size() != factors.size()) {
      throw std::logic_error("coupled_rate_table: per-path functional returned wrong level count");
    }
    return errs;
  };
  const auto per_path_errors = parallel_map(mc.paths, mc.threads, work);

  RateTable table;
  table.k_ref = k_ref;
  table.T = T;
  std::vector<double> column(static_cast<std::size_t>(mc.paths));
  for (std::size_t level = 0; level < k_levels.size(); ++level) {
    for (std::size_t p = 0; p < column.size(); ++p) column[p] = per_path_errors[p][level];
    const Estimate sq = mean_and_se(column);
    RateRow row;
    row.k = k_levels[level];
    row.rms_error = std::sqrt(sq.mean);
    row.mc_se = sq.mean > 0.0 ? sq.se / (2.0 * row.rms_error) : 0.0;
    row.paths = mc.paths;
    table.rows.push_back(row);
  }
  table.notes.push_back("reference solution: backward Euler at k_ref = " + format_double(k_ref) +
                        " on the same Brownian path (self-convergence); the fitted slope carries a "
                        "bias of relative order (k_ref / k)^gamma at the finest level");
  if (table.rows.size() >= 3) {
    try {
      table.fit = fit_rate(table);
    } catch (const std::invalid_argument& e) {
      table.notes.push_back(std::string("no rate fit: ") + e.what());
    }
  }
  return table;
}

RateTable strong_error(const ProblemSpec& spec, std::span<const double> k_levels, double k_ref,
                       const MonteCarloOptions& mc, const StepSolverConfig& cfg) {
  spec.validate();
  RateTable gates;
  check_convergence_gates(spec, k_levels, k_ref, gates);
  auto per_path = [&](Index p, const BrownianPath& ref_path, std::span<const Index> factors) {
    const PathStart start = initial_state(spec, mc.seed, p);
    const Trajectory ref = run_level(spec, ref_path, cfg, start, p);
    std::vector<double> errs;
    errs.reserve(factors.size());
    for (Index f : factors) {
      const Trajectory coarse = run_level(spec, coarsen(ref_path, f), cfg, start, p);
      double worst = 0.0;
      for (Index n = 0; n <= coarse.grid.N; ++n) {
        worst = std::max(worst, (ref.states.col(n * f) - coarse.states.col(n)).squaredNorm());
      }
      errs.push_back(worst);
    }
    return errs;
  };
  RateTable table = coupled_rate_table(spec.T, spec.m, k_levels, k_ref, mc, per_path);
  table.gates = std::move(gates.gates);
  return table;
}

RateTable eta_integral_error(const ProblemSpec& spec, std::span<const double> k_levels, double k_ref,
                             const MonteCarloOptions& mc, const StepSolverConfig& cfg) {
  spec.validate();
  RateTable gates;
  check_convergence_gates(spec, k_levels, k_ref, gates);
  auto per_path = [&](Index p, const BrownianPath& ref_path, std::span<const Index> factors) {
    const PathStart start = initial_state(spec, mc.seed, p);
    const Matrix ref = running_eta_integral(run_level(spec, ref_path, cfg, start, p));
    std::vector<double> errs;
    errs.reserve(factors.size());
    for (Index f : factors) {
      const Matrix coarse = running_eta_integral(run_level(spec, coarsen(ref_path, f), cfg, start, p));
      double worst = 0.0;
      for (Index n = 0; n < coarse.cols(); ++n) {
        worst = std::max(worst, (ref.col(n * f) - coarse.col(n)).squaredNorm());
      }
      errs.push_back(worst);
    }
    return errs;
  };
  RateTable table = coupled_rate_table(spec.T, spec.m, k_levels, k_ref, mc, per_path);
  table.gates = std::move(gates.gates);
  return table;
}

RateFit fit_rate(const RateTable& table) {
  if (table.rows.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 rows");
  RateFit fit;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const RateRow& row : table.rows) {
    if (row.rms_error == 0.0) {
      fit.excluded_k.push_back(row.k);
      continue;
    }
    xs.push_back(std::log2(row.k));
    ys.push_back(std::log2(row.rms_error));
  }
  const auto n = static_cast<Index>(xs.size());
  if (n < 2) throw std::invalid_argument("fit_rate: fewer than 2 rows with nonzero error");

  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd rhs(n);
  for (Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = xs[static_cast<std::size_t>(i)];
    rhs(i) = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(rhs);
  fit.intercept = beta(0);
  fit.slope = beta(1);
  fit.used_rows = n;
  if (n > 2) {
    const double ssr = (rhs - design * beta).squaredNorm();
    const double mean_x = design.col(1).mean();
    const double sxx = (design.col(1).array() - mean_x).square().sum();
    fit.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  } else {
    fit.slope_se = kNaN;
  }
  return fit;
}

DiagnosticsReport apriori_diagnostics(const ProblemSpec& spec, std::span<const double> k_levels,
                                      const MonteCarloOptions& mc, const StepSolverConfig& cfg,
                                      const DiagnosticsOptions& opts) {
  spec.validate();
  require_decreasing(k_levels);
  if (mc.paths < 2) throw std::invalid_argument("apriori_diagnostics: need at least 2 paths");
  const auto growth = opts.growth ? opts.growth : spec.drift->growth();
  if (!growth) {
    throw std::invalid_argument("apriori_diagnostics: drift '" + spec.drift->name() +
                                "' declares no coercivity constants; supply them explicitly");
  }
  DiagnosticsReport report;
  report.growth = *growth;

  std::vector<std::vector<GateCheck>> level_gates;
  for (double k : k_levels) {
    auto gates = all_gates(spec, k);
    if (!gates[1].passed) throw GateError(gates[1]);
    level_gates.push_back(std::move(gates));
  }
  const double k_fine = k_levels.back();
  const Grid fine_grid = Grid::from_step(spec.T, k_fine);
  std::vector<Index> factors;
  for (double k : k_levels) factors.push_back(integer_ratio(k, k_fine, "apriori_diagnostics"));
  const bool has_potential = spec.drift->potential(Vector::Zero(spec.d)).has_value();

  struct LevelSample {
    std::vector<double> second_moments;  // |X^n|^2, n = 0..N
    double increments = 0.0;
    double coercive = 0.0;
    double gap = 0.0;
    double potential_lhs = 0.0;
  };
  struct PathSample {
    double x0_sq = 0.0;
    std::vector<LevelSample> levels;
  };

  auto work = [&](Index p) {
    const BrownianPath fine = sample_path(mc.seed, static_cast<std::uint64_t>(p), fine_grid, spec.m);
    const PathStart start = initial_state(spec, mc.seed, p);
    PathSample out;
    out.x0_sq = start.x0.squaredNorm();
    for (Index f : factors) {
      const Trajectory traj = run_level(spec, coarsen(fine, f), cfg, start, p);
      const double k = traj.grid.step();
      LevelSample s;
      s.second_moments.resize(static_cast<std::size_t>(traj.grid.N + 1));
      KahanSum inc, coer, gap, pot;
      for (Index n = 0; n <= traj.grid.N; ++n) {
        s.second_moments[static_cast<std::size_t>(n)] = traj.states.col(n).squaredNorm();
        if (n == 0) continue;
        const Vector dx = traj.states.col(n) - traj.states.col(n - 1);
        inc.add(dx.squaredNorm());
        coer.add(std::pow(traj.states.col(n).norm(), growth->p));
        gap.add(dx.dot(traj.selections.col(n) - traj.selections.col(n - 1)));
        if (has_potential) pot.add(*spec.drift->potential(traj.states.col(n)));
      }
      s.increments = 0.5 * inc.value();
      s.coercive = 2.0 * growth->mu * k * coer.value();
      s.gap = k * gap.value();
      s.potential_lhs = has_potential ? inc.value() + 4.0 * k * pot.value() : kNaN;
      out.levels.push_back(std::move(s));
    }
    return out;
  };
  const auto samples = parallel_map(mc.paths, mc.threads, work);

  const auto P = static_cast<std::size_t>(mc.paths);
  std::vector<double> column(P);
  auto reduce = [&](auto&& get) {
    for (std::size_t p = 0; p < P; ++p) column[p] = get(samples[p]);
    return mean_and_se(column);
  };
  const Estimate x0_sq = reduce([](const PathSample& s) { return s.x0_sq; });

  for (std::size_t level = 0; level < k_levels.size(); ++level) {
    DiagnosticsRow row;
    row.k = k_levels[level];
    row.gates = level_gates[level];
    row.initial_second_moment = x0_sq;
    const std::size_t N = samples[0].levels[level].second_moments.size() - 1;
    Estimate best{-1.0, 0.0};
    for (std::size_t n = 1; n <= N; ++n) {
      const Estimate e =
          reduce([&](const PathSample& s) { return s.levels[level].second_moments[n]; });
      if (e.mean > best.mean) best = e;
    }
    row.max_second_moment = best;
    row.sum_increments = reduce([&](const PathSample& s) { return s.levels[level].increments; });
    row.coercive_sum = reduce([&](const PathSample& s) { return s.levels[level].coercive; });
    row.monotone_gap = reduce([&](const PathSample& s) { return s.levels[level].gap; });
    row.potential_lhs = has_potential
                            ? reduce([&](const PathSample& s) { return s.levels[level].potential_lhs; })
                            : Estimate{kNaN, kNaN};
    report.rows.push_back(std::move(row));
  }
  return report;
}

Estimate monotone_gap(const ProblemSpec& spec, double k, const MonteCarloOptions& mc,
                      const StepSolverConfig& cfg) {
  spec.validate();
  require_step_size(spec.b.lipschitz, k, StepGate(GateRegime::Apriori));
  if (mc.paths < 2) throw std::invalid_argument("monotone_gap: need at least 2 paths");
  const Grid grid = Grid::from_step(spec.T, k);
  auto work = [&](Index p) {
    const BrownianPath path = sample_path(mc.seed, static_cast<std::uint64_t>(p), grid, spec.m);
    const Trajectory traj = run_level(spec, path, cfg, initial_state(spec, mc.seed, p), p);
    KahanSum gap;
    for (Index n = 1; n <= grid.N; ++n) {
      gap.add((traj.selections.col(n) - traj.selections.col(n - 1))
                  .dot(traj.states.col(n) - traj.states.col(n - 1)));
    }
    return k * gap.value();
  };
  const std::vector<double> values = parallel_map(mc.paths, mc.threads, work);
  return mean_and_se(values);
}

std::optional<LangevinBounds> langevin_bounds(const ProblemSpec& spec, double initial_second_moment) {
  if (!spec.g.constant) return std::nullopt;
  const auto phi0 = spec.drift->potential(Vector::Zero(spec.d));
  if (!phi0) return std::nullopt;
  const double forcing = *phi0 + spec.g.constant->squaredNorm();
  return LangevinBounds{initial_second_moment + 2.0 * spec.T * forcing,
                        2.0 * initial_second_moment + 4.0 * spec.T * forcing};
}

void write_rate_csv(const RateTable& table, std::ostream& out) {
  out << "k,rms_error,mc_se,paths\n";
  for (const RateRow& row : table.rows) {
    out << format_double(row.k) << ',' << format_double(row.rms_error) << ','
        << format_double(row.mc_se) << ',' << row.paths << '\n';
  }
}

void write_diagnostics_csv(const DiagnosticsReport& report, std::ostream& out) {
  out << "k,max_second_moment,sum_increments,coercive_sum,monotone_gap,gap_se\n";
  for (const DiagnosticsRow& row : report.rows) {
    out << format_double(row.k) << ',' << format_double(row.max_second_moment.mean) << ','
        << format_double(row.sum_increments.mean) << ',' << format_double(row.coercive_sum.mean)
        << ',' << format_double(row.monotone_gap.mean) << ','
        << format_double(row.monotone_gap.se) << '\n';
  }
}

}  // namespace msde
