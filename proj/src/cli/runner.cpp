#include "msde/cli.hpp"
#include "msde/format.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace msde::cli {

using nlohmann::json;

namespace {

json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

json fit_json(const RateFit& fit) {
  json j = {{"slope", fit.slope},
            {"intercept", fit.intercept},
            {"used_rows", fit.used_rows},
            {"excluded_k", fit.excluded_k}};
  j["slope_se"] = std::isfinite(fit.slope_se) ? json(fit.slope_se) : json(nullptr);
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

RunResult run(const RunConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<GateCheck> gates = validate(cfg);

  const ExperimentConfig& ex = cfg.experiment;
  MonteCarloOptions mc;
  mc.paths = ex.paths;
  mc.seed = opts.seed.value_or(ex.seed);
  mc.threads = std::max(1u, opts.threads);

  const std::filesystem::path dir = opts.out_dir.value_or(std::filesystem::path(cfg.output.directory));
  std::filesystem::create_directories(dir);
  RunResult result;
  result.csv = dir / (cfg.output.prefix + ".csv");
  result.meta = dir / (cfg.output.prefix + ".meta.json");

  json meta;
  meta["version"] = kVersion;
  meta["experiment"] = to_string(ex.kind);
  meta["seed"] = mc.seed;
  meta["paths"] = mc.paths;
  meta["threads"] = mc.threads;
  meta["config"] = cfg.source;
  meta["gates"] = json::array();
  for (const auto& g : gates) meta["gates"].push_back(gate_to_json(g));

  std::ostringstream csv;
  csv.precision(17);

  switch (ex.kind) {
    case ExperimentKind::Rate:
    case ExperimentKind::EtaRate: {
      const ProblemSpec spec = build_problem(cfg.problem);
      const RateTable table = ex.kind == ExperimentKind::Rate
                                  ? strong_error(spec, ex.k_levels, *ex.k_ref, mc, cfg.solver)
                                  : eta_integral_error(spec, ex.k_levels, *ex.k_ref, mc, cfg.solver);
      write_rate_csv(table, csv);
      meta["k_ref"] = table.k_ref;
      meta["fit"] = table.fit ? fit_json(*table.fit) : json(nullptr);
      meta["notes"] = table.notes;
      break;
    }
    case ExperimentKind::Diagnostics: {
      const ProblemSpec spec = build_problem(cfg.problem);
      const DiagnosticsReport report = apriori_diagnostics(spec, ex.k_levels, mc, cfg.solver);
      write_diagnostics_csv(report, csv);
      const GrowthParams& gp = report.growth;
      meta["growth"] = {{"p", gp.p}, {"mu", gp.mu}, {"lambda", gp.lambda}, {"beta", gp.beta}};
      json rows = json::array();
      for (const auto& r : report.rows) {
        rows.push_back({{"k", r.k},
                        {"initial_second_moment", estimate_json(r.initial_second_moment)},
                        {"potential_lhs", std::isfinite(r.potential_lhs.mean)
                                              ? estimate_json(r.potential_lhs)
                                              : json(nullptr)}});
      }
      meta["rows"] = rows;
      break;
    }
    case ExperimentKind::Gap: {
      const ProblemSpec spec = build_problem(cfg.problem);
      csv << "k,monotone_gap,gap_se\n";
      for (double k : ex.k_levels) {
        const Estimate gap = monotone_gap(spec, k, mc, cfg.solver);
        csv << format_double(k) << ',' << format_double(gap.mean) << ',' << format_double(gap.se) << '\n';
      }
      break;
    }
    case ExperimentKind::WienerCheck: {
      const Grid grid = Grid::from_step(cfg.problem.T, *ex.k);
      InterpolationCheckOptions io;
      io.fine_factor = ex.fine_factor;
      io.quadrature = ex.quadrature;
      io.threads = mc.threads;
      const Estimate est = interpolation_error_mc(ex.g0, grid, mc.paths, mc.seed, io);
      const double exact = interpolation_error_exact(ex.g0, grid);
      csv << "k,estimate,se,exact\n"
          << format_double(grid.step()) << ',' << format_double(est.mean) << ','
          << format_double(est.se) << ',' << format_double(exact) << '\n';
      meta["wiener"] = {{"estimate", est.mean},
                        {"se", est.se},
                        {"exact", exact},
                        {"z", est.se > 0.0 ? (est.mean - exact) / est.se : 0.0},
                        {"fine_factor", ex.fine_factor},
                        {"quadrature", ex.quadrature == Quadrature::Simpson ? "simpson" : "trapezoid"}};
      break;
    }
    case ExperimentKind::Trajectory: {
      const ProblemSpec spec = build_problem(cfg.problem);
      const Grid grid = Grid::from_step(spec.T, *ex.k);
      const auto index = static_cast<std::uint64_t>(ex.path_index);
      const BrownianPath path = sample_path(mc.seed, index, grid, spec.m);
      Rng rng = make_rng(mc.seed, index, kInitialStream);
      const Vector x0 = spec.initial(rng);
      const Trajectory traj = run_backward_euler(spec, path, cfg.solver, x0, spec.drift->selection(x0));
      write_trajectory_csv(traj, csv);
      meta["path_index"] = ex.path_index;
      if (ex.dump_increments) {
        std::ostringstream bin(std::ios::binary);
        write_increments(path, bin);
        const auto inc = dir / (cfg.output.prefix + ".increments.bin");
        write_file(inc, bin.str(), true);
        meta["increments"] = {{"file", inc.filename().string()},
                              {"steps", grid.N},
                              {"noise_dim", spec.m},
                              {"layout", "little-endian float64, row-major [step][component]"}};
      }
      break;
    }
  }

  write_file(result.csv, csv.str());
  meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(result.meta, meta.dump(2) + "\n");
  result.metadata = std::move(meta);
  return result;
}

}  // namespace msde::cli
