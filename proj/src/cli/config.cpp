#include "msde/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace msde::cli {

using nlohmann::json;

namespace {

/// View on one JSON object that remembers its key path for error messages.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = {}) const {
    throw ConfigError("config key '" + join(key) + "': " + msg);
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [key, _] : node_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) fail("unknown key", key);
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  Section child(const std::string& key) const {
    if (!has(key)) fail("missing section", key);
    return Section(node_.at(key), join(key));
  }

  template <typename T>
  T get(const std::string& key) const {
    if (!has(key)) fail("missing required value", key);
    return convert<T>(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? convert<T>(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail("expected an array of numbers", key);
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) fail("expected an array of numbers", key);
      out.push_back(x.get<double>());
    }
    return out;
  }

  Matrix matrix(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array() || v.empty()) fail("expected a non-empty array of rows", key);
    const auto rows = static_cast<Index>(v.size());
    Index cols = -1;
    Matrix out;
    for (Index i = 0; i < rows; ++i) {
      const json& row = v[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.empty()) fail("expected a non-empty array of rows", key);
      if (cols < 0) {
        cols = static_cast<Index>(row.size());
        out.resize(rows, cols);
      }
      if (static_cast<Index>(row.size()) != cols) fail("rows have different lengths", key);
      for (Index j = 0; j < cols; ++j) {
        const json& x = row[static_cast<std::size_t>(j)];
        if (!x.is_number()) fail("matrix entries must be numbers", key);
        out(i, j) = x.get<double>();
      }
    }
    return out;
  }

  Vector vector(const std::string& key) const {
    const auto v = numbers(key);
    if (v.empty()) fail("expected a non-empty array", key);
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
  }

 private:
  const json& at(const std::string& key) const {
    if (!has(key)) fail("missing required value", key);
    return node_.at(key);
  }

  std::string join(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  T convert(const std::string& key) const {
    const json& v = node_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail("expected a boolean", key);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail("expected a string", key);
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail("expected an integer", key);
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) fail("expected a nonnegative integer", key);
      }
    } else {
      if (!v.is_number()) fail("expected a number", key);
    }
    return v.get<T>();
  }

  const json& node_;
  std::string path_;
};

ExperimentKind parse_kind(const Section& s) {
  const auto kind = s.get<std::string>("kind");
  if (kind == "rate") return ExperimentKind::Rate;
  if (kind == "eta-rate") return ExperimentKind::EtaRate;
  if (kind == "diagnostics") return ExperimentKind::Diagnostics;
  if (kind == "gap") return ExperimentKind::Gap;
  if (kind == "wiener-check") return ExperimentKind::WienerCheck;
  if (kind == "trajectory") return ExperimentKind::Trajectory;
  s.fail("unknown experiment kind '" + kind + "'", "kind");
}

ProblemConfig parse_problem(const Section& s, ExperimentKind kind) {
  s.allow({"model", "dim", "noise_dim", "T", "A", "b", "g", "x0", "fem"});
  ProblemConfig p;
  p.T = s.get<double>("T");
  if (!(p.T > 0.0)) s.fail("must be positive", "T");
  if (kind == ExperimentKind::WienerCheck && !s.has("model")) return p;

  p.model = s.get<std::string>("model");
  p.noise_dim = s.get<Index>("noise_dim", 1);
  if (p.noise_dim < 1) s.fail("must be positive", "noise_dim");
  if (s.has("A")) {
    p.A = s.matrix("A");
    p.dim = s.get<Index>("dim", p.A->rows());
  } else {
    p.dim = s.get<Index>("dim", 1);
  }
  if (p.dim < 1) s.fail("must be positive", "dim");

  if (s.has("b")) {
    const Section b = s.child("b");
    b.allow({"kind", "scale"});
    p.b_kind = b.get<std::string>("kind");
    if (p.b_kind != "zero" && p.b_kind != "linear" && p.b_kind != "sin") {
      b.fail("must be 'zero', 'linear' or 'sin'", "kind");
    }
    p.b_scale = p.b_kind == "zero" ? 0.0 : b.get<double>("scale");
  }

  if (p.model == "plaplace") {
    if (s.has("g") || s.has("x0") || s.has("A") || s.has("dim")) {
      s.fail("the plaplace model takes diffusion and initial data from 'fem'", "model");
    }
    const Section f = s.child("fem");
    f.allow({"L", "elements", "p_lap", "diffusion", "shape", "initial"});
    FemConfig fem;
    fem.L = f.get<double>("L", fem.L);
    fem.elements = f.get<Index>("elements", fem.elements);
    fem.p_lap = f.get<double>("p_lap", fem.p_lap);
    fem.diffusion = f.get<std::string>("diffusion", fem.diffusion);
    fem.shape = f.get<std::string>("shape", fem.shape);
    fem.initial = f.get<std::string>("initial", fem.initial);
    if (!(fem.L > 0.0)) f.fail("must be positive", "L");
    if (fem.elements < 2) f.fail("must be at least 2", "elements");
    if (!(fem.p_lap >= 2.0)) f.fail("must be >= 2", "p_lap");
    p.dim = fem.elements - 1;
    p.fem = fem;
    return p;
  }
  if (s.has("fem")) s.fail("only valid with model 'plaplace'", "fem");

  const Section g = s.child("g");
  g.allow({"kind", "g0", "sigma"});
  p.g_kind = g.get<std::string>("kind");
  if (p.g_kind == "additive") {
    p.g0 = g.matrix("g0");
    if (p.g0.rows() != p.dim || p.g0.cols() != p.noise_dim) g.fail("must be dim x noise_dim", "g0");
  } else if (p.g_kind == "multiplicative") {
    p.g_sigma = g.get<double>("sigma");
  } else if (p.g_kind != "zero") {
    g.fail("must be 'zero', 'additive' or 'multiplicative'", "kind");
  }

  const Section x0 = s.child("x0");
  x0.allow({"kind", "value", "mean", "std"});
  p.x0_kind = x0.get<std::string>("kind");
  if (p.x0_kind == "fixed") {
    p.x0_value = x0.vector("value");
  } else if (p.x0_kind == "gaussian") {
    p.x0_value = x0.vector("mean");
    p.x0_std = x0.get<double>("std");
    if (!(p.x0_std >= 0.0)) x0.fail("must be nonnegative", "std");
  } else {
    x0.fail("must be 'fixed' or 'gaussian'", "kind");
  }
  if (p.x0_value.size() != p.dim) x0.fail("dimension must equal dim", p.x0_kind == "fixed" ? "value" : "mean");
  return p;
}

ExperimentConfig parse_experiment(const Section& s) {
  ExperimentConfig e;
  e.kind = parse_kind(s);
  e.paths = s.get<Index>("paths", e.paths);
  e.seed = s.get<std::uint64_t>("seed", e.seed);
  if (e.paths < 1) s.fail("must be positive", "paths");

  switch (e.kind) {
    case ExperimentKind::Rate:
    case ExperimentKind::EtaRate:
      s.allow({"kind", "k_levels", "k_ref", "paths", "seed"});
      e.k_levels = s.numbers("k_levels");
      if (s.has("k_ref")) e.k_ref = s.get<double>("k_ref");
      break;
    case ExperimentKind::Diagnostics:
    case ExperimentKind::Gap:
      s.allow({"kind", "k_levels", "paths", "seed"});
      e.k_levels = s.numbers("k_levels");
      break;
    case ExperimentKind::WienerCheck: {
      s.allow({"kind", "k", "paths", "seed", "g0", "fine_factor", "quadrature"});
      e.k = s.get<double>("k");
      e.g0 = s.matrix("g0");
      e.fine_factor = s.get<Index>("fine_factor", e.fine_factor);
      const auto quad = s.get<std::string>("quadrature", "simpson");
      if (quad == "simpson") e.quadrature = Quadrature::Simpson;
      else if (quad == "trapezoid") e.quadrature = Quadrature::Trapezoid;
      else s.fail("must be 'simpson' or 'trapezoid'", "quadrature");
      if (e.fine_factor < 1) s.fail("must be positive", "fine_factor");
      if (e.quadrature == Quadrature::Simpson && e.fine_factor % 2 != 0) {
        s.fail("must be even for Simpson quadrature", "fine_factor");
      }
      if (e.paths < 2) s.fail("must be at least 2", "paths");
      break;
    }
    case ExperimentKind::Trajectory:
      s.allow({"kind", "k", "seed", "path_index", "dump_increments", "paths"});
      e.k = s.get<double>("k");
      e.path_index = s.get<Index>("path_index", 0);
      e.dump_increments = s.get<bool>("dump_increments", false);
      if (e.path_index < 0) s.fail("must be nonnegative", "path_index");
      break;
  }
  for (double k : e.k_levels) {
    if (!(k > 0.0)) s.fail("step sizes must be positive", "k_levels");
  }
  if (e.k && !(*e.k > 0.0)) s.fail("must be positive", "k");
  if (e.kind == ExperimentKind::Rate || e.kind == ExperimentKind::EtaRate ||
      e.kind == ExperimentKind::Diagnostics || e.kind == ExperimentKind::Gap) {
    if (e.k_levels.empty()) s.fail("needs at least one level", "k_levels");
    for (std::size_t i = 1; i < e.k_levels.size(); ++i) {
      if (!(e.k_levels[i] < e.k_levels[i - 1])) s.fail("must be strictly decreasing", "k_levels");
    }
    if ((e.kind == ExperimentKind::Rate || e.kind == ExperimentKind::EtaRate) && e.paths < 2) {
      s.fail("must be at least 2", "paths");
    }
    if (e.kind == ExperimentKind::Rate || e.kind == ExperimentKind::EtaRate) {
      // reference step defaults to a sixteenth of the finest level
      if (!e.k_ref) e.k_ref = e.k_levels.back() / 16.0;
      if (!(*e.k_ref > 0.0) || *e.k_ref > e.k_levels.back()) {
        s.fail("must be positive and not exceed the finest level", "k_ref");
      }
    }
  }
  return e;
}

Grid grid_or_fail(double T, double k, const std::string& what) {
  try {
    return Grid::from_step(T, k);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + what + "': " + e.what());
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Rate: return "rate";
    case ExperimentKind::EtaRate: return "eta-rate";
    case ExperimentKind::Diagnostics: return "diagnostics";
    case ExperimentKind::Gap: return "gap";
    case ExperimentKind::WienerCheck: return "wiener-check";
    case ExperimentKind::Trajectory: return "trajectory";
  }
  return "unknown";
}

RunConfig parse_config(const json& doc) {
  const Section root(doc, "");
  root.allow({"problem", "experiment", "solver", "output"});
  RunConfig cfg;
  cfg.source = doc;
  cfg.experiment = parse_experiment(root.child("experiment"));
  cfg.problem = parse_problem(root.child("problem"), cfg.experiment.kind);

  if (root.has("solver")) {
    const Section s = root.child("solver");
    s.allow({"outer_max_iters", "outer_tol"});
    cfg.solver.outer_max_iters = s.get<int>("outer_max_iters", cfg.solver.outer_max_iters);
    cfg.solver.outer_tol = s.get<double>("outer_tol", cfg.solver.outer_tol);
    if (cfg.solver.outer_max_iters < 1) s.fail("must be positive", "outer_max_iters");
    if (!(cfg.solver.outer_tol > 0.0)) s.fail("must be positive", "outer_tol");
  }
  cfg.output.prefix = to_string(cfg.experiment.kind);
  if (root.has("output")) {
    const Section o = root.child("output");
    o.allow({"directory", "prefix"});
    cfg.output.directory = o.get<std::string>("directory", cfg.output.directory);
    cfg.output.prefix = o.get<std::string>("prefix", cfg.output.prefix);
    if (cfg.output.prefix.empty()) o.fail("must not be empty", "prefix");
  }

  // Every simulated step must divide the horizon.
  for (double k : cfg.experiment.k_levels) grid_or_fail(cfg.problem.T, k, "experiment.k_levels");
  if (cfg.experiment.k_ref) grid_or_fail(cfg.problem.T, *cfg.experiment.k_ref, "experiment.k_ref");
  if (cfg.experiment.k) grid_or_fail(cfg.problem.T, *cfg.experiment.k, "experiment.k");
  if (cfg.experiment.kind == ExperimentKind::Rate || cfg.experiment.kind == ExperimentKind::EtaRate) {
    for (double k : cfg.experiment.k_levels) {
      const double r = k / *cfg.experiment.k_ref;
      if (std::abs(r - std::round(r)) > 1e-9 * r) {
        throw ConfigError("config key 'experiment.k_levels': every level must be an integer multiple of k_ref");
      }
    }
  }
  if (cfg.experiment.kind == ExperimentKind::Diagnostics) {
    const double fine = cfg.experiment.k_levels.back();
    for (double k : cfg.experiment.k_levels) {
      const double r = k / fine;
      if (std::abs(r - std::round(r)) > 1e-9 * r) {
        throw ConfigError("config key 'experiment.k_levels': every level must be an integer multiple of the finest");
      }
    }
  }
  if (cfg.experiment.kind != ExperimentKind::WienerCheck) {
    try {
      build_problem(cfg.problem).validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config key 'problem': ") + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

ProblemSpec build_problem(const ProblemConfig& p) {
  ProblemSpec spec;
  spec.T = p.T;
  spec.m = p.noise_dim;
  spec.d = p.dim;
  if (p.b_kind == "linear") spec.b = LipschitzMap::linear(p.b_scale);
  else if (p.b_kind == "sin") spec.b = LipschitzMap::sine(p.b_scale);
  else spec.b = LipschitzMap::zero(p.dim);

  if (p.model == "plaplace") {
    const FemConfig& f = *p.fem;
    const Mesh1D mesh(f.L, f.elements);
    auto model = std::make_shared<const PLaplaceModel>(
        mesh, f.p_lap, NemytskiiDiffusion::parse(f.diffusion, f.shape, p.noise_dim));
    spec.g = build_diffusion(*model);
    spec.initial = fixed_initial(project_initial(named_initial_data(f.initial, mesh), *model));
    spec.drift = model;
    return spec;
  }

  try {
    spec.drift = make_drift(p.model, p.dim, p.A);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'problem.model': ") + e.what());
  }
  if (p.g_kind == "additive") spec.g = DiffusionMap::additive(p.g0);
  else if (p.g_kind == "multiplicative") spec.g = DiffusionMap::multiplicative(p.g_sigma, p.noise_dim);
  else spec.g = DiffusionMap::zero(p.dim, p.noise_dim);
  spec.initial = p.x0_kind == "gaussian" ? gaussian_initial(p.x0_value, p.x0_std)
                                         : fixed_initial(p.x0_value);
  return spec;
}

std::vector<double> simulated_steps(const RunConfig& cfg) {
  std::vector<double> steps = cfg.experiment.k_levels;
  if (cfg.experiment.k_ref) steps.push_back(*cfg.experiment.k_ref);
  if (cfg.experiment.k) steps.push_back(*cfg.experiment.k);
  return steps;
}

std::vector<GateCheck> validate(const RunConfig& cfg) {
  std::vector<GateCheck> checks;
  if (cfg.experiment.kind == ExperimentKind::WienerCheck) return checks;
  const ProblemSpec spec = build_problem(cfg.problem);
  std::optional<GateRegime> required;
  switch (cfg.experiment.kind) {
    case ExperimentKind::Rate:
    case ExperimentKind::EtaRate: required = GateRegime::Convergence; break;
    case ExperimentKind::Diagnostics:
    case ExperimentKind::Gap: required = GateRegime::Apriori; break;
    default: break;
  }
  const auto steps = simulated_steps(cfg);
  for (double k : steps) {
    checks.push_back(require_step_size(spec.b.lipschitz, k, StepGate(GateRegime::Solvability)));
  }
  if (required) {
    for (double k : steps) checks.push_back(require_step_size(spec.b.lipschitz, k, StepGate(*required)));
  }
  return checks;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("MSDE_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  std::uint64_t seed = 0;
  const std::string_view text(v);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("MSDE_SEED must be a nonnegative integer, got '" + std::string(text) + "'");
  }
  return seed;
}

std::vector<ModelInfo> list_models() {
  auto models = list_drift_models();
  models.push_back({"plaplace", "1D P1 finite element p-Laplacian (p >= 2), configured under problem.fem"});
  return models;
}

json gate_to_json(const GateCheck& c) {
  return {{"regime", to_string(c.regime)},
          {"factor", StepGate(c.regime).factor()},
          {"k", c.k},
          {"product", c.product},
          {"slack", c.slack},
          {"passed", c.passed}};
}

}  // namespace msde::cli
