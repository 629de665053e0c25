#pragma once

// Built-in maximal monotone drifts: the sign subdifferential ∂|x|, gradients
// of power potentials |x|^p, and monotone linear maps.

#include "msde/core.hpp"

#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

namespace msde {

template <typename Scalar>
struct ProxResult {
  Scalar x;
  Scalar eta;
};

/// Soft thresholding: the resolvent of k ∂|·| in one dimension.
template <typename Scalar>
ProxResult<Scalar> prox_abs(Scalar w, Scalar k) {
  using std::abs;
  const Scalar shrunk = abs(w) - k;
  const Scalar x = shrunk > Scalar(0) ? (w > Scalar(0) ? shrunk : -shrunk) : Scalar(0);
  return {x, (w - x) / k};
}

/// Resolvent of k ∇|x|^p (p > 1): solves x + k p |x|^{p-2} x = w.
///
/// Works on the half-line [0, |w|] with safeguarded Newton steps, then
/// reflects. The bracket is always valid: x + k p x^{p-1} - |w| is continuous,
/// strictly increasing, negative at 0 and nonnegative at |w|.
template <typename Scalar>
ProxResult<Scalar> prox_power(Scalar w, Scalar k, Scalar p) {
  using std::abs;
  using std::pow;
  const Scalar a = abs(w);
  if (a == Scalar(0)) return {Scalar(0), Scalar(0)};
  if (p == Scalar(2)) {
    const Scalar x = w / (Scalar(1) + Scalar(2) * k);
    return {x, (w - x) / k};
  }
  auto residual = [&](Scalar x) { return x + k * p * pow(x, p - Scalar(1)) - a; };
  Scalar lo = 0;
  Scalar hi = a;
  Scalar x = a / (Scalar(1) + k * p * pow(a, p - Scalar(2)));  // one-step linearised guess
  if (!(x > lo && x < hi)) x = Scalar(0.5) * a;
  const Scalar tol = Scalar(1e-14) * a;
  for (int iter = 0; iter < 200; ++iter) {
    const Scalar r = residual(x);
    if (r == Scalar(0)) break;
    if (r < Scalar(0)) lo = x; else hi = x;
    if (hi - lo <= tol) break;
    const Scalar slope = Scalar(1) + k * p * (p - Scalar(1)) * pow(x, p - Scalar(2));
    Scalar next = x - r / slope;
    if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
    if (abs(next - x) <= tol) {
      x = next;
      break;
    }
    x = next;
  }
  const Scalar signed_x = w > Scalar(0) ? x : -x;
  return {signed_x, (w - signed_x) / k};
}

struct LinearResolvent {
  Vector x;
  Vector eta;
};

/// Solves (I + kA) x = w by Cholesky factorization; eta = A x.
LinearResolvent resolvent_linear(const Vector& w, double k, const Matrix& A);

/// f = ∂|·| on R: {1} for x > 0, [-1, 1] at 0, {-1} for x < 0.
class AbsSubdifferential final : public MonotoneDrift {
 public:
  Index dim() const override { return 1; }
  std::string name() const override { return "abs"; }
  std::optional<GrowthParams> growth() const override { return GrowthParams(1.0, 1.0, 0.0, 1.0); }
  Vector resolvent(const Vector& w, double k) const override;
  Vector selection(const Vector& x) const override;
  std::optional<double> potential(const Vector& x) const override { return std::abs(x(0)); }
};

/// f(x) = p |x|^{p-2} x = ∇|x|^p on R, p > 1.
class PowerPotentialGrad final : public MonotoneDrift {
 public:
  explicit PowerPotentialGrad(double exponent);

  double exponent() const { return p_; }
  /// Hölder exponent alpha = p - 1 for p in (1, 2]; empty otherwise.
  std::optional<double> holder_exponent() const;
  /// Constant L_f in |f(x) - f(y)| <= L_f |x - y|^alpha, i.e. p 2^{1-alpha}.
  std::optional<double> holder_constant() const;

  Index dim() const override { return 1; }
  std::string name() const override;
  std::optional<GrowthParams> growth() const override { return GrowthParams(p_, p_, 0.0, p_); }
  Vector resolvent(const Vector& w, double k) const override;
  Vector selection(const Vector& x) const override;
  std::optional<double> potential(const Vector& x) const override {
    return std::pow(std::abs(x(0)), p_);
  }

 private:
  double p_;
};

/// f(x) = A x for symmetric positive semi-definite A.
class MonotoneLinearDrift final : public MonotoneDrift {
 public:
  explicit MonotoneLinearDrift(Matrix A);

  const Matrix& matrix() const { return A_; }

  Index dim() const override { return A_.rows(); }
  std::string name() const override { return "linear"; }
  /// Coercive (p = 2, mu = lambda_min) only when A is positive definite.
  std::optional<GrowthParams> growth() const override;
  Vector resolvent(const Vector& w, double k) const override;
  Vector selection(const Vector& x) const override { return A_ * x; }
  std::optional<double> potential(const Vector& x) const override { return 0.5 * x.dot(A_ * x); }

 private:
  Matrix A_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

struct ModelInfo {
  std::string name;
  std::string description;
};

/// Names accepted by make_drift: "abs", "power:<p>", "linear", "zero".
std::vector<ModelInfo> list_drift_models();

/// `A` is used by "linear" (defaults to the identity of size d); "zero" is the
/// linear drift with A = 0.
DriftPtr make_drift(std::string_view name, Index d = 1, const std::optional<Matrix>& A = std::nullopt);

}  // namespace msde
