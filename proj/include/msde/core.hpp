#pragma once

// Problem and operator abstractions for multi-valued SDEs
//
//     dX + f(X) dt  ∋  b(X) dt + g(X) dW,
//
// where f is maximal monotone (possibly set-valued), b is Lipschitz and g is a
// Lipschitz diffusion matrix. f is only ever accessed through its resolvent.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace msde {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Per-path random stream. Seeded from (base seed, path index, stream id) so
/// that changing the number of paths never perturbs earlier paths.
using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t path_index, std::uint64_t stream);

// Streams used by the library; a path's Brownian increments and its initial
// value are drawn from independent generators.
inline constexpr std::uint64_t kWienerStream = 0;
inline constexpr std::uint64_t kInitialStream = 1;

/// Coercivity and growth constants of the drift:
///   <f_v, v> >= mu |v|^p - lambda,   |f_v| <= beta (1 + |v|^{p-1}).
struct GrowthParams {
  double p = 1.0;
  double mu = 1.0;
  double lambda = 0.0;
  double beta = 0.0;

  GrowthParams() = default;
  GrowthParams(double p_, double mu_, double lambda_, double beta_);

  /// Conjugate exponent p/(p-1); empty for p == 1.
  std::optional<double> conjugate() const;
};

/// Maximal monotone drift, exposed through its resolvent x = (I + k f)^{-1} w.
class MonotoneDrift {
 public:
  virtual ~MonotoneDrift() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;
  /// Coercivity/growth constants; empty when f is monotone but not coercive
  /// (e.g. a singular linear map).
  virtual std::optional<GrowthParams> growth() const = 0;

  /// Solves x + k f(x) ∋ w.
  virtual Vector resolvent(const Vector& w, double k) const = 0;

  /// Minimal-norm element of f(x); used as the initial selection eta^0.
  virtual Vector selection(const Vector& x) const = 0;

  /// Convex potential Phi with f = ∂Phi, if the drift is a subdifferential.
  virtual std::optional<double> potential(const Vector& /*x*/) const { return std::nullopt; }

  virtual bool in_domain(const Vector& /*x*/) const { return true; }

  /// eta(w, k) = (w - R(w, k)) / k, an element of f(R(w, k)).
  Vector induced_selection(const Vector& w, double k) const {
    return (w - resolvent(w, k)) / k;
  }
};

using DriftPtr = std::shared_ptr<const MonotoneDrift>;

/// Globally Lipschitz perturbation b with declared constant L_b.
struct LipschitzMap {
  std::function<Vector(const Vector&)> eval;
  double lipschitz = 0.0;
  /// b ≡ 0; lets the step solver skip the outer iteration.
  bool identically_zero = false;

  Vector operator()(const Vector& x) const { return eval(x); }

  static LipschitzMap zero(Index d);
  static LipschitzMap linear(double scale);
  static LipschitzMap sine(double scale);
};

/// Diffusion x -> g(x) ∈ R^{d×m}, Lipschitz in the Frobenius norm with L_g.
struct DiffusionMap {
  std::function<Matrix(const Vector&)> eval;
  double lipschitz = 0.0;
  Index noise_dim = 1;
  /// Set when g(x) does not depend on x (additive noise).
  std::optional<Matrix> constant;

  Matrix operator()(const Vector& x) const { return eval(x); }

  static DiffusionMap zero(Index d, Index m);
  static DiffusionMap additive(Matrix g0);
  /// g(x) = sigma * x * 1^T, Lipschitz constant |sigma| sqrt(m).
  static DiffusionMap multiplicative(double sigma, Index m);
};

/// Sampler for X_0. Receives the path's initial-value stream.
using InitialLaw = std::function<Vector(Rng&)>;

InitialLaw fixed_initial(Vector x0);
InitialLaw gaussian_initial(Vector mean, double stddev);

/// Complete MSDE instance.
struct ProblemSpec {
  Index d = 1;
  Index m = 1;
  DriftPtr drift;
  LipschitzMap b;
  DiffusionMap g;
  InitialLaw initial;
  double T = 1.0;

  /// Checks dimensions of drift/b/g against (d, m) at a probe point and
  /// that a sampled initial value lies in the drift's domain.
  void validate() const;
};

enum class GateRegime { Solvability, Apriori, Convergence };

/// Step-size smallness condition factor * L_b * k < 1.
class StepGate {
 public:
  constexpr explicit StepGate(GateRegime regime) : regime_(regime) {}

  /// Only the factors 1, 5 and 8 are meaningful.
  static StepGate from_factor(double factor);

  constexpr GateRegime regime() const { return regime_; }
  constexpr double factor() const {
    switch (regime_) {
      case GateRegime::Solvability: return 1.0;
      case GateRegime::Apriori: return 5.0;
      case GateRegime::Convergence: return 8.0;
    }
    return 0.0;
  }

 private:
  GateRegime regime_;
};

std::string to_string(GateRegime regime);

struct GateCheck {
  GateRegime regime = GateRegime::Solvability;
  double k = 0.0;
  double product = 0.0;  ///< factor * L_b * k
  double slack = 1.0;    ///< 1 - product
  bool passed = true;
};

GateCheck validate_step_size(const ProblemSpec& spec, double k, StepGate gate);
GateCheck validate_step_size(double lipschitz_b, double k, StepGate gate);

/// Like validate_step_size but throws GateError on failure.
GateCheck require_step_size(double lipschitz_b, double k, StepGate gate);

class GateError : public std::runtime_error {
 public:
  explicit GateError(const GateCheck& check);
  const GateCheck& check() const { return check_; }

 private:
  GateCheck check_;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msde
