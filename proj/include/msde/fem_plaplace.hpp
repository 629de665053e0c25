#pragma once

// P1 finite elements on (0, L) with homogeneous Dirichlet conditions for the
// stochastic p-Laplace equation
//
//     du - div(|∇u|^{p-2} ∇u) dt = Psi(u) dW.
//
// Coefficient vectors x ∈ R^d hold the values at the d = E - 1 interior nodes.
// The drift is the assembled stiffness vector S(x), the gradient of the
// discrete energy Phi_h(x) = (1/p) ∫ |v_x'|^p.

#include "msde/core.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <functional>
#include <string>
#include <string_view>

namespace msde {

struct Mesh1D {
  double L = 1.0;
  Index elements = 2;

  Mesh1D() = default;
  Mesh1D(double L_, Index elements_);

  double h() const { return L / static_cast<double>(elements); }
  Index interior() const { return elements - 1; }
  double node(Index j) const { return static_cast<double>(j) * h(); }
};

namespace detail {

/// |c|^{p-2} c with the p = 2 and c = 0 cases taken exactly.
template <typename Scalar>
Scalar flux(Scalar c, double p) {
  using std::abs;
  using std::pow;
  if (p == 2.0) return c;
  if (c == Scalar(0)) return Scalar(0);
  return pow(abs(c), Scalar(p - 2.0)) * c;
}

}  // namespace detail

/// Constant element gradients c_e = (u_{e+1} - u_e) / h, e = 0..E-1, with the
/// boundary values u_0 = u_E = 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> element_gradients(
    const Eigen::MatrixBase<Derived>& x, const Mesh1D& mesh) {
  using Scalar = typename Derived::Scalar;
  const Index E = mesh.elements;
  const Scalar inv_h = Scalar(1) / Scalar(mesh.h());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(E);
  for (Index e = 0; e < E; ++e) {
    const Scalar right = e + 1 < E ? x(e) : Scalar(0);
    const Scalar left = e > 0 ? x(e - 1) : Scalar(0);
    c(e) = (right - left) * inv_h;
  }
  return c;
}

/// S(x)_j = ∫ |v_x'|^{p-2} v_x' phi_j'  (exact: the integrand is constant per element).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_stiffness(
    const Eigen::MatrixBase<Derived>& x, const Mesh1D& mesh, double p) {
  using Scalar = typename Derived::Scalar;
  const auto c = element_gradients(x, mesh);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(mesh.interior());
  for (Index j = 0; j < mesh.interior(); ++j) {
    s(j) = detail::flux(c(j), p) - detail::flux(c(j + 1), p);
  }
  return s;
}

/// Phi_h(x) = (1/p) sum_e h |c_e|^p.
template <typename Derived>
typename Derived::Scalar energy(const Eigen::MatrixBase<Derived>& x, const Mesh1D& mesh, double p) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::pow;
  const auto c = element_gradients(x, mesh);
  Scalar sum(0);
  for (Index e = 0; e < c.size(); ++e) sum += pow(abs(c(e)), Scalar(p));
  return Scalar(mesh.h()) * sum / Scalar(p);
}

/// Jacobian of S: tridiagonal, sum over elements of (p-1)|c_e|^{p-2}/h times
/// the local matrix [1 -1; -1 1].
Eigen::SparseMatrix<double> stiffness_jacobian(const Vector& x, const Mesh1D& mesh, double p);

/// Tridiagonal P1 mass matrix: 2h/3 on the diagonal, h/6 off it.
Matrix assemble_mass(const Mesh1D& mesh);

/// (∫ u phi_j)_j by 3-point Gauss quadrature per element.
Vector load_vector(const std::function<double(double)>& u, const Mesh1D& mesh);

/// Nemytskii diffusion Psi(u) = scale * shape(u) * (1, ..., 1) / sqrt(m).
struct NemytskiiDiffusion {
  enum class Shape { Zero, Constant, Identity, Sine };

  Shape shape = Shape::Zero;
  double scale = 0.0;
  Index m = 1;

  double shape_value(double u) const;
  /// Lipschitz constant of Psi in the Hilbert-Schmidt norm.
  double lipschitz() const;

  /// "zero" | "scalar-lipschitz:<L>" with shape "sin" | "identity" | "const".
  static NemytskiiDiffusion parse(std::string_view spec, std::string_view shape_name, Index m);
};

struct NewtonConfig {
  int max_iters = 100;
  double tol = 1e-10;  ///< on |x + k S(x) - w|, scaled by (1 + |w|)
  double armijo = 1e-4;
  int max_backtracks = 60;
};

class PLaplaceModel final : public MonotoneDrift {
 public:
  PLaplaceModel(Mesh1D mesh, double p, NemytskiiDiffusion psi = {}, NewtonConfig newton = {});

  const Mesh1D& mesh() const { return mesh_; }
  double p() const { return p_; }
  const NemytskiiDiffusion& psi() const { return psi_; }
  const NewtonConfig& newton() const { return newton_; }
  const Matrix& mass() const { return mass_; }
  /// Symmetric square root M_h^{1/2}, so that |M_h^{1/2} z|^2 = <M_h z, z>.
  const Matrix& noise_factor() const { return mass_sqrt_; }
  const Eigen::LLT<Matrix>& mass_factorization() const { return mass_llt_; }

  Vector stiffness(const Vector& x) const { return apply_stiffness(x, mesh_, p_); }
  double energy_of(const Vector& x) const { return energy(x, mesh_, p_); }

  Index dim() const override { return mesh_.interior(); }
  std::string name() const override { return "plaplace"; }
  /// mu = 1 / (d^{p/2} L^{p-1}), beta = 2 sqrt(d) (2/h)^{p-1}: conservative
  /// discrete Poincaré and inverse-inequality constants.
  std::optional<GrowthParams> growth() const override;
  Vector resolvent(const Vector& w, double k) const override;
  Vector selection(const Vector& x) const override { return stiffness(x); }
  std::optional<double> potential(const Vector& x) const override { return energy_of(x); }

 private:
  Mesh1D mesh_;
  double p_;
  NemytskiiDiffusion psi_;
  NewtonConfig newton_;
  Matrix mass_;
  Eigen::LLT<Matrix> mass_llt_;
  Matrix mass_sqrt_;
};

struct PLaplaceResolvent {
  Vector x;
  Vector eta;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// argmin_x 1/2 |x - w|^2 + k Phi_h(x) by damped Newton with Armijo
/// backtracking; eta = (w - x) / k.
PLaplaceResolvent plaplace_resolvent(const Vector& w, double k, const PLaplaceModel& model);

/// L2 projection of u0 onto V_h: solves M_h x0 = load(u0).
Vector project_initial(const std::function<double(double)>& u0, const PLaplaceModel& model);

/// Named initial data: "zero", "sin" (sin(pi xi / L)), "hat:<j>" (basis function j, 1-based).
std::function<double(double)> named_initial_data(std::string_view name, const Mesh1D& mesh);

/// Coefficients gt(x) = M_h^{-1} (∫ Psi(v_x) phi_j)_j, one column per noise component.
Matrix diffusion_coefficients(const Vector& x, const PLaplaceModel& model);

/// g(x) = M_h^{1/2} gt(x); Lipschitz constant L_Psi sqrt(lambda_max(M_h)) <= L_Psi sqrt(h).
DiffusionMap build_diffusion(const PLaplaceModel& model);

}  // namespace msde
