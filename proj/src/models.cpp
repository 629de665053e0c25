#include "msde/models.hpp"

#include <charconv>
#include <string>

namespace msde {

LinearResolvent resolvent_linear(const Vector& w, double k, const Matrix& A) {
  const Index d = A.rows();
  const Matrix system = Matrix::Identity(d, d) + k * A;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw SolverError("resolvent_linear: I + kA is not positive definite");
  }
  Vector x = llt.solve(w);
  Vector eta = A * x;
  return {std::move(x), std::move(eta)};
}

Vector AbsSubdifferential::resolvent(const Vector& w, double k) const {
  return Vector::Constant(1, prox_abs(w(0), k).x);
}

Vector AbsSubdifferential::selection(const Vector& x) const {
  const double v = x(0);
  return Vector::Constant(1, v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
}

PowerPotentialGrad::PowerPotentialGrad(double exponent) : p_(exponent) {
  if (!(exponent > 1.0) || !std::isfinite(exponent)) {
    throw std::invalid_argument("PowerPotentialGrad: exponent must be in (1, inf)");
  }
}

std::optional<double> PowerPotentialGrad::holder_exponent() const {
  if (p_ > 2.0) return std::nullopt;
  return p_ - 1.0;
}

std::optional<double> PowerPotentialGrad::holder_constant() const {
  const auto alpha = holder_exponent();
  if (!alpha) return std::nullopt;
  return p_ * std::pow(2.0, 1.0 - *alpha);
}

std::string PowerPotentialGrad::name() const {
  std::string s = std::to_string(p_);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return "power:" + s;
}

Vector PowerPotentialGrad::resolvent(const Vector& w, double k) const {
  return Vector::Constant(1, prox_power(w(0), k, p_).x);
}

Vector PowerPotentialGrad::selection(const Vector& x) const {
  const double v = x(0);
  if (v == 0.0) return Vector::Zero(1);
  return Vector::Constant(1, p_ * std::pow(std::abs(v), p_ - 2.0) * v);
}

MonotoneLinearDrift::MonotoneLinearDrift(Matrix A) : A_(std::move(A)) {
  if (A_.rows() != A_.cols() || A_.rows() < 1) {
    throw std::invalid_argument("MonotoneLinearDrift: A must be square and non-empty");
  }
  const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
  if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("MonotoneLinearDrift: A must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (A_ + A_.transpose()), Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
  lambda_max_ = eig.eigenvalues().maxCoeff();
  if (lambda_min_ < -1e-12 * scale) {
    throw std::invalid_argument("MonotoneLinearDrift: A must be positive semi-definite");
  }
}

std::optional<GrowthParams> MonotoneLinearDrift::growth() const {
  if (lambda_min_ <= 0.0) return std::nullopt;
  return GrowthParams(2.0, lambda_min_, 0.0, lambda_max_);
}

Vector MonotoneLinearDrift::resolvent(const Vector& w, double k) const {
  return resolvent_linear(w, k, A_).x;
}

std::vector<ModelInfo> list_drift_models() {
  return {
      {"abs", "subdifferential of |x| (d = 1), resolvent = soft thresholding"},
      {"power:<p>", "gradient of |x|^p, p > 1 (d = 1); Hölder with alpha = p - 1 for p <= 2"},
      {"linear", "f(x) = A x for symmetric positive semi-definite A"},
      {"zero", "f = 0 (linear drift with A = 0)"},
  };
}

DriftPtr make_drift(std::string_view name, Index d, const std::optional<Matrix>& A) {
  if (name == "abs") {
    if (d != 1) throw std::invalid_argument("model 'abs' requires d = 1");
    return std::make_shared<AbsSubdifferential>();
  }
  if (name.starts_with("power:")) {
    if (d != 1) throw std::invalid_argument("model 'power' requires d = 1");
    const std::string_view arg = name.substr(6);
    double p = 0.0;
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p);
    if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
      throw std::invalid_argument("model 'power:<p>': cannot parse exponent '" + std::string(arg) + "'");
    }
    return std::make_shared<PowerPotentialGrad>(p);
  }
  if (name == "linear") {
    Matrix mat = A ? *A : Matrix::Identity(d, d);
    if (mat.rows() != d) throw std::invalid_argument("model 'linear': A must be d x d");
    return std::make_shared<MonotoneLinearDrift>(std::move(mat));
  }
  if (name == "zero") return std::make_shared<MonotoneLinearDrift>(Matrix::Zero(d, d));
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

}  // namespace msde
