#include "msde/core.hpp"

#include <cmath>
#include <sstream>

namespace msde {

Rng make_rng(std::uint64_t seed, std::uint64_t path_index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

GrowthParams::GrowthParams(double p_, double mu_, double lambda_, double beta_)
    : p(p_), mu(mu_), lambda(lambda_), beta(beta_) {
  if (!(p >= 1.0) || !(mu > 0.0) || !(lambda >= 0.0) || !(beta >= 0.0)) {
    throw std::invalid_argument("GrowthParams: need p >= 1, mu > 0, lambda >= 0, beta >= 0");
  }
}

std::optional<double> GrowthParams::conjugate() const {
  if (p == 1.0) return std::nullopt;
  return p / (p - 1.0);
}

LipschitzMap LipschitzMap::zero(Index d) {
  return {[d](const Vector&) { return Vector::Zero(d).eval(); }, 0.0, true};
}

LipschitzMap LipschitzMap::linear(double scale) {
  return {[scale](const Vector& x) { return (scale * x).eval(); }, std::abs(scale), scale == 0.0};
}

LipschitzMap LipschitzMap::sine(double scale) {
  return {[scale](const Vector& x) { return (scale * x.array().sin()).matrix().eval(); },
          std::abs(scale), scale == 0.0};
}

DiffusionMap DiffusionMap::zero(Index d, Index m) {
  Matrix z = Matrix::Zero(d, m);
  return {[z](const Vector&) { return z; }, 0.0, m, z};
}

DiffusionMap DiffusionMap::additive(Matrix g0) {
  const Index m = g0.cols();
  return {[g0](const Vector&) { return g0; }, 0.0, m, g0};
}

DiffusionMap DiffusionMap::multiplicative(double sigma, Index m) {
  return {[sigma, m](const Vector& x) { return (sigma * x * Eigen::RowVectorXd::Ones(m)).eval(); },
          std::abs(sigma) * std::sqrt(static_cast<double>(m)), m, std::nullopt};
}

InitialLaw fixed_initial(Vector x0) {
  return [x0 = std::move(x0)](Rng&) { return x0; };
}

InitialLaw gaussian_initial(Vector mean, double stddev) {
  return [mean = std::move(mean), stddev](Rng& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Vector x = mean;
    for (Index i = 0; i < x.size(); ++i) x(i) += normal(rng);
    return x;
  };
}

void ProblemSpec::validate() const {
  if (d < 1 || m < 1) throw std::invalid_argument("ProblemSpec: dimensions must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("ProblemSpec: horizon T must be positive");
  if (!drift || !b.eval || !g.eval || !initial) {
    throw std::invalid_argument("ProblemSpec: drift, b, g and initial law are required");
  }
  if (drift->dim() != d) throw std::invalid_argument("ProblemSpec: drift dimension != d");
  if (g.noise_dim != m) throw std::invalid_argument("ProblemSpec: diffusion noise dimension != m");
  const Vector probe = Vector::Zero(d);
  if (b(probe).size() != d) throw std::invalid_argument("ProblemSpec: b output dimension != d");
  const Matrix g_probe = g(probe);
  if (g_probe.rows() != d || g_probe.cols() != m) {
    throw std::invalid_argument("ProblemSpec: g output is not d x m");
  }
  Rng rng = make_rng(0, 0, kInitialStream);
  const Vector x0 = initial(rng);
  if (x0.size() != d) throw std::invalid_argument("ProblemSpec: initial value dimension != d");
  if (!drift->in_domain(x0)) throw std::invalid_argument("ProblemSpec: initial value outside D(f)");
}

StepGate StepGate::from_factor(double factor) {
  if (factor == 1.0) return StepGate(GateRegime::Solvability);
  if (factor == 5.0) return StepGate(GateRegime::Apriori);
  if (factor == 8.0) return StepGate(GateRegime::Convergence);
  throw std::invalid_argument("StepGate: factor must be 1, 5 or 8");
}

std::string to_string(GateRegime regime) {
  switch (regime) {
    case GateRegime::Solvability: return "Solvability";
    case GateRegime::Apriori: return "Apriori";
    case GateRegime::Convergence: return "Convergence";
  }
  return "Unknown";
}

GateCheck validate_step_size(double lipschitz_b, double k, StepGate gate) {
  if (!(k > 0.0)) throw std::invalid_argument("validate_step_size: k must be positive");
  GateCheck check;
  check.regime = gate.regime();
  check.k = k;
  check.product = gate.factor() * lipschitz_b * k;
  check.slack = 1.0 - check.product;
  check.passed = check.product < 1.0;
  return check;
}

GateCheck validate_step_size(const ProblemSpec& spec, double k, StepGate gate) {
  return validate_step_size(spec.b.lipschitz, k, gate);
}

GateCheck require_step_size(double lipschitz_b, double k, StepGate gate) {
  GateCheck check = validate_step_size(lipschitz_b, k, gate);
  if (!check.passed) throw GateError(check);
  return check;
}

namespace {
std::string gate_message(const GateCheck& c) {
  std::ostringstream os;
  os << to_string(c.regime) << " gate violated: " << StepGate(c.regime).factor()
     << " * L_b * k = " << c.product << " >= 1 at k = " << c.k;
  return os.str();
}
}  // namespace

GateError::GateError(const GateCheck& check)
    : std::runtime_error(gate_message(check)), check_(check) {}

}  // namespace msde
