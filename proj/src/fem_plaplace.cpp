#include "msde/fem_plaplace.hpp"
#include "msde/format.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <charconv>
#include <numbers>
#include <string>
#include <vector>

namespace msde {

Mesh1D::Mesh1D(double L_, Index elements_) : L(L_), elements(elements_) {
  if (!(L > 0.0) || elements < 2) {
    throw std::invalid_argument("Mesh1D: need L > 0 and at least two elements");
  }
}

Eigen::SparseMatrix<double> stiffness_jacobian(const Vector& x, const Mesh1D& mesh, double p) {
  const Index d = mesh.interior();
  const Vector c = element_gradients(x, mesh);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(3 * d));
  for (Index e = 0; e < mesh.elements; ++e) {
    const double slope =
        p == 2.0 ? 1.0 : (c(e) == 0.0 ? 0.0 : (p - 1.0) * std::pow(std::abs(c(e)), p - 2.0));
    const double a = slope / mesh.h();
    // element e couples interior unknowns e-1 and e (when they exist)
    const Index left = e - 1;
    const Index right = e;
    if (left >= 0) entries.emplace_back(left, left, a);
    if (right < d) entries.emplace_back(right, right, a);
    if (left >= 0 && right < d) {
      entries.emplace_back(left, right, -a);
      entries.emplace_back(right, left, -a);
    }
  }
  Eigen::SparseMatrix<double> J(d, d);
  J.setFromTriplets(entries.begin(), entries.end());
  return J;
}

Matrix assemble_mass(const Mesh1D& mesh) {
  const Index d = mesh.interior();
  const double h = mesh.h();
  Matrix M = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    M(j, j) = 2.0 * h / 3.0;
    if (j + 1 < d) M(j, j + 1) = M(j + 1, j) = h / 6.0;
  }
  return M;
}

namespace {

constexpr std::array<double, 3> kGaussPoints = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kGaussWeights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

Vector load_vector(const std::function<double(double)>& u, const Mesh1D& mesh) {
  const Index d = mesh.interior();
  const double h = mesh.h();
  Vector load = Vector::Zero(d);
  for (Index e = 0; e < mesh.elements; ++e) {
    const double a = mesh.node(e);
    const double mid = a + 0.5 * h;
    for (std::size_t q = 0; q < 3; ++q) {
      const double xi = mid + 0.5 * h * kGaussPoints[q];
      const double w = 0.5 * h * kGaussWeights[q];
      const double value = u(xi);
      if (!std::isfinite(value)) {
        throw std::domain_error("load_vector: non-finite integrand at xi = " + format_double(xi));
      }
      const double phi_right = (xi - a) / h;  // basis of node e+1
      const double phi_left = 1.0 - phi_right;  // basis of node e
      if (e >= 1) load(e - 1) += w * value * phi_left;
      if (e < d) load(e) += w * value * phi_right;
    }
  }
  return load;
}

double NemytskiiDiffusion::shape_value(double u) const {
  switch (shape) {
    case Shape::Zero: return 0.0;
    case Shape::Constant: return 1.0;
    case Shape::Identity: return u;
    case Shape::Sine: return std::sin(u);
  }
  return 0.0;
}

double NemytskiiDiffusion::lipschitz() const {
  switch (shape) {
    case Shape::Zero:
    case Shape::Constant: return 0.0;
    case Shape::Identity:
    case Shape::Sine: return std::abs(scale);
  }
  return 0.0;
}

NemytskiiDiffusion NemytskiiDiffusion::parse(std::string_view spec, std::string_view shape_name, Index m) {
  if (m < 1) throw std::invalid_argument("diffusion: noise dimension must be positive");
  NemytskiiDiffusion out;
  out.m = m;
  if (spec == "zero") return out;
  constexpr std::string_view prefix = "scalar-lipschitz:";
  if (!spec.starts_with(prefix)) {
    throw std::invalid_argument("diffusion spec must be 'zero' or 'scalar-lipschitz:<L>'");
  }
  out.scale = parse_number(spec.substr(prefix.size()), "diffusion Lipschitz constant");
  if (shape_name == "sin") out.shape = Shape::Sine;
  else if (shape_name == "identity") out.shape = Shape::Identity;
  else if (shape_name == "const") out.shape = Shape::Constant;
  else throw std::invalid_argument("unknown diffusion shape '" + std::string(shape_name) + "'");
  return out;
}

PLaplaceModel::PLaplaceModel(Mesh1D mesh, double p, NemytskiiDiffusion psi, NewtonConfig newton)
    : mesh_(mesh), p_(p), psi_(psi), newton_(newton), mass_(assemble_mass(mesh)), mass_llt_(mass_) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw std::invalid_argument("PLaplaceModel: need p >= 2");
  if (mass_llt_.info() != Eigen::Success) {
    throw SolverError("PLaplaceModel: mass matrix factorization failed");
  }
  mass_sqrt_ = Eigen::SelfAdjointEigenSolver<Matrix>(mass_).operatorSqrt();
}

std::optional<GrowthParams> PLaplaceModel::growth() const {
  const double d = static_cast<double>(dim());
  const double mu = 1.0 / (std::pow(d, 0.5 * p_) * std::pow(mesh_.L, p_ - 1.0));
  const double beta = 2.0 * std::sqrt(d) * std::pow(2.0 / mesh_.h(), p_ - 1.0);
  return GrowthParams(p_, mu, 0.0, beta);
}

Vector PLaplaceModel::resolvent(const Vector& w, double k) const {
  return plaplace_resolvent(w, k, *this).x;
}

PLaplaceResolvent plaplace_resolvent(const Vector& w, double k, const PLaplaceModel& model) {
  if (!(k > 0.0)) throw std::invalid_argument("plaplace_resolvent: k must be positive");
  const Mesh1D& mesh = model.mesh();
  const double p = model.p();
  const NewtonConfig& cfg = model.newton();
  const Index d = mesh.interior();

  auto objective = [&](const Vector& x) {
    return 0.5 * (x - w).squaredNorm() + k * energy(x, mesh, p);
  };
  auto gradient = [&](const Vector& x) -> Vector { return x - w + k * apply_stiffness(x, mesh, p); };

  const double tol = cfg.tol * (1.0 + w.norm());
  PLaplaceResolvent out;
  Vector x = w;
  Vector grad = gradient(x);
  double f = objective(x);
  Eigen::SparseMatrix<double> identity(d, d);
  identity.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;

  for (int it = 0; it <= cfg.max_iters; ++it) {
    out.gradient_norm = grad.norm();
    out.iterations = it;
    if (out.gradient_norm <= tol) {
      out.eta = (w - x) / k;
      out.x = std::move(x);
      return out;
    }
    if (it == cfg.max_iters) break;

    const Eigen::SparseMatrix<double> H = identity + k * stiffness_jacobian(x, mesh, p);
    solver.compute(H);
    if (solver.info() != Eigen::Success) {
      throw SolverError("plaplace_resolvent: Hessian factorization failed");
    }
    const Vector step = -solver.solve(grad);
    const double slope = grad.dot(step);

    // Near the solution the objective is flat to rounding and Armijo can only
    // accept vanishing steps; there the full step is taken when it reduces the
    // gradient norm.
    Vector trial = x + step;
    double f_trial = objective(trial);
    bool accepted = f_trial <= f + cfg.armijo * slope;
    if (!accepted && std::abs(f_trial - f) <= 1e-12 * (1.0 + std::abs(f)) &&
        gradient(trial).norm() < out.gradient_norm) {
      accepted = true;
    }
    double t = 0.5;
    for (int bt = 1; !accepted && bt < cfg.max_backtracks; ++bt, t *= 0.5) {
      trial = x + t * step;
      f_trial = objective(trial);
      accepted = f_trial <= f + cfg.armijo * t * slope;
    }
    if (!accepted) {
      throw SolverError("plaplace_resolvent: line search failed, gradient norm " +
                        format_double(out.gradient_norm));
    }
    x = std::move(trial);
    f = f_trial;
    grad = gradient(x);
  }
  throw SolverError("plaplace_resolvent: no convergence after " + std::to_string(cfg.max_iters) +
                    " Newton iterations, gradient norm " + format_double(out.gradient_norm));
}

Vector project_initial(const std::function<double(double)>& u0, const PLaplaceModel& model) {
  return model.mass_factorization().solve(load_vector(u0, model.mesh()));
}

std::function<double(double)> named_initial_data(std::string_view name, const Mesh1D& mesh) {
  if (name == "zero") return [](double) { return 0.0; };
  if (name == "sin") {
    const double L = mesh.L;
    return [L](double xi) { return std::sin(std::numbers::pi * xi / L); };
  }
  if (name.starts_with("hat:")) {
    const double j = parse_number(name.substr(4), "hat index");
    if (j < 1 || j > static_cast<double>(mesh.interior()) || j != std::floor(j)) {
      throw std::invalid_argument("hat index must be an interior node 1..d");
    }
    const double center = j * mesh.h();
    const double h = mesh.h();
    return [center, h](double xi) { return std::max(0.0, 1.0 - std::abs(xi - center) / h); };
  }
  throw std::invalid_argument("unknown initial data '" + std::string(name) + "'");
}

Matrix diffusion_coefficients(const Vector& x, const PLaplaceModel& model) {
  const Mesh1D& mesh = model.mesh();
  const NemytskiiDiffusion& psi = model.psi();
  const double h = mesh.h();
  // v_x(xi), piecewise linear through the interior values and zero boundary
  auto v = [&](double xi) {
    const auto e = std::clamp<Index>(static_cast<Index>(xi / h), 0, mesh.elements - 1);
    const double s = (xi - mesh.node(e)) / h;
    const double left = e > 0 ? x(e - 1) : 0.0;
    const double right = e + 1 < mesh.elements ? x(e) : 0.0;
    return (1.0 - s) * left + s * right;
  };
  const Vector load = load_vector([&](double xi) { return psi.shape_value(v(xi)); }, mesh);
  const Vector column = model.mass_factorization().solve(load) *
                        (psi.scale / std::sqrt(static_cast<double>(psi.m)));
  return column * Eigen::RowVectorXd::Ones(psi.m);
}

DiffusionMap build_diffusion(const PLaplaceModel& model) {
  const NemytskiiDiffusion& psi = model.psi();
  const Index d = model.dim();
  if (psi.shape == NemytskiiDiffusion::Shape::Zero || psi.scale == 0.0) {
    return DiffusionMap::zero(d, psi.m);
  }
  const Matrix B = model.noise_factor();
  // |g(x) - g(y)| = |P_h (Psi(v_x) - Psi(v_y))|_{L2} <= L_Psi |v_x - v_y|_{L2}
  // <= L_Psi sqrt(lambda_max) |x - y|; the interior mass matrix has
  // eigenvalues h (2 + cos(j pi / E)) / 3, j = 1..E-1.
  const Mesh1D& mesh = model.mesh();
  const double lambda_max =
      mesh.h() * (2.0 + std::cos(std::numbers::pi / static_cast<double>(mesh.elements))) / 3.0;
  const double L_g = psi.lipschitz() * std::sqrt(lambda_max);
  if (psi.shape == NemytskiiDiffusion::Shape::Constant) {
    Matrix g0 = B * diffusion_coefficients(Vector::Zero(d), model);
    return {[g0](const Vector&) { return g0; }, 0.0, psi.m, g0};
  }
  // The map owns a copy of the model.
  auto shared = std::make_shared<const PLaplaceModel>(model);
  return {[shared, B](const Vector& x) -> Matrix { return B * diffusion_coefficients(x, *shared); },
          L_g, psi.m, std::nullopt};
}

}  // namespace msde
