#include "pnode/prior.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>

#include "pnode/error.hpp"

namespace pnode {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int k = 2; k <= n; ++k) r *= k;
  return r;
}

double binomial(int n, int k) {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

Matrix hilbert_like(int q) {
  const int n = q + 1;
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = 1.0 / (2.0 * q + 1.0 - i - j);
  return m;
}

QBarFactor factorize_q_bar(int q) {
  const Matrix q_bar = hilbert_like(q);
  Eigen::LLT<Matrix> llt(q_bar);
  if (llt.info() == Eigen::Success) {
    Matrix u = llt.matrixU();
    const Vector diag = u.diagonal();
    if ((diag.array() > 0.0).all() && diag.allFinite()) return {u, false};
  }
  // Clip the spectrum and re-triangularize sqrt(L) V^T.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q_bar);
  Vector lambda = eig.eigenvalues();
  const double floor = 1e-15 * lambda.maxCoeff();
  lambda = lambda.cwiseMax(floor);
  const Matrix half = lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  return {triangularize(half), true};
}

Matrix nonsquare_pinv(const Matrix& m) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  return cod.pseudoInverse();
}

}  // namespace

IWPModel::IWPModel(int dim, int order, double sigma2) : d(dim), q(order), diffusion(sigma2) {
  if (dim < 1 || order < 1 || !(sigma2 >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "IWP model needs d >= 1, q >= 1, diffusion >= 0");
  }
}

Matrix Projection::matrix(int d, int q) const {
  Matrix e = Matrix::Zero(d, static_cast<Eigen::Index>(d) * (q + 1));
  e.block(0, static_cast<Eigen::Index>(index) * d, d, d).setIdentity();
  return e;
}

IWPTransition iwp_transition(int q, double h) {
  const int n = q + 1;
  IWPTransition out;
  out.a = Matrix::Zero(n, n);
  out.q = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) out.a(i, j) = std::pow(h, j - i) / factorial(j - i);
    for (int j = 0; j < n; ++j) {
      const int p = 2 * q + 1 - i - j;
      out.q(i, j) = std::pow(h, p) / (p * factorial(q - i) * factorial(q - j));
    }
  }
  if (h > 0.0) {
    const Preconditioner pre = preconditioner(q, h);
    out.q_sqrt = pre.q_bar_sqrt * pre.t.asDiagonal();
  } else {
    out.q_sqrt = Matrix::Zero(n, n);
  }
  return out;
}

const QBarFactor& q_bar_factor(int q) {
  static std::shared_mutex mutex;
  static std::map<int, QBarFactor> cache;
  {
    std::shared_lock lock(mutex);
    auto it = cache.find(q);
    if (it != cache.end()) return it->second;
  }
  std::unique_lock lock(mutex);
  auto [it, inserted] = cache.try_emplace(q);
  if (inserted) it->second = factorize_q_bar(q);
  return it->second;
}

Preconditioner preconditioner(int q, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "preconditioner needs h > 0");
  const int n = q + 1;
  Preconditioner p;
  p.t.resize(n);
  p.t_inv.resize(n);
  p.a_bar = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    p.t(i) = std::pow(h, q - i + 0.5) / factorial(q - i);
    p.t_inv(i) = 1.0 / p.t(i);
    for (int j = i; j < n; ++j) p.a_bar(i, j) = binomial(q - i, j - i);
  }
  p.q_bar = hilbert_like(q);
  const QBarFactor& f = q_bar_factor(q);
  p.q_bar_sqrt = f.rfactor;
  p.ill_conditioned = f.ill_conditioned;
  return p;
}

Matrix kron_identity(const Matrix& m, int d) {
  Matrix out = Matrix::Zero(m.rows() * d, m.cols() * d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) out.block(i * d, j * d, d, d).diagonal().setConstant(m(i, j));
  return out;
}

StateTransition state_transition(const IWPModel& model, double h) {
  const IWPTransition t = iwp_transition(model.q, h);
  return {kron_identity(t.a, model.d), std::sqrt(model.diffusion) * kron_identity(t.q_sqrt, model.d)};
}

GaussianSqrt predict_preconditioned(const GaussianSqrt& state, const IWPModel& model, double h) {
  const Preconditioner pre = preconditioner(model.q, h);
  const Eigen::Index dim = model.state_dim();
  Vector scale(dim);
  for (int i = 0; i <= model.q; ++i) scale.segment(static_cast<Eigen::Index>(i) * model.d, model.d).setConstant(pre.t(i));

  const GaussianSqrt bar{state.mean.cwiseQuotient(scale),
                         state.rfactor * scale.cwiseInverse().asDiagonal()};
  const Matrix a_bar = kron_identity(pre.a_bar, model.d);
  const Matrix q_bar = std::sqrt(model.diffusion) * kron_identity(pre.q_bar_sqrt, model.d);
  const GaussianSqrt next = predict(bar, a_bar, q_bar);
  return {next.mean.cwiseProduct(scale), next.rfactor * scale.asDiagonal()};
}

namespace {

std::vector<Vector> to_derivatives(const std::vector<std::vector<double>>& coeff, int d, int q) {
  std::vector<Vector> out(q + 1, Vector(d));
  for (int k = 0; k <= q; ++k) {
    const double fact = factorial(k);
    for (int i = 0; i < d; ++i) out[k](i) = fact * coeff[i][k];
  }
  return out;
}

// Semi-explicit DAE with diagonal mass: differential rows follow the ODE
// recursion, algebraic rows solve J_aa c_{k+1} = -[f_a]_{k+1}, which is exact
// because the (k+1)-th coefficient of f_a(y(t)) is affine in c_{k+1}.
std::vector<Vector> dae_taylor_coefficients(const IVProblem& problem, int q) {
  const int d = problem.dim;
  const Matrix& mass = *problem.mass;
  if (!mass.isDiagonal()) {
    throw Error(ErrorCode::UnsupportedField, "jet initialization needs a diagonal mass matrix");
  }
  std::vector<int> algebraic;
  for (int i = 0; i < d; ++i)
    if (mass(i, i) == 0.0) algebraic.push_back(i);
  const auto na = static_cast<Eigen::Index>(algebraic.size());
  const Matrix jac = problem.df_dy(Vector(), problem.y0);
  Matrix j_aa(na, na);
  for (Eigen::Index r = 0; r < na; ++r)
    for (Eigen::Index c = 0; c < na; ++c) j_aa(r, c) = jac(algebraic[r], algebraic[c]);
  const Eigen::FullPivLU<Matrix> lu(j_aa);
  if (na > 0 && !lu.isInvertible()) {
    throw Error(ErrorCode::UnsupportedField, "algebraic block is singular (index > 1)");
  }

  std::vector<std::vector<double>> coeff(d);
  for (int i = 0; i < d; ++i) coeff[i].push_back(problem.y0(i));
  auto jets = [&](std::size_t len) {
    std::vector<Jet> y(d);
    for (int i = 0; i < d; ++i) {
      std::vector<double> c = coeff[i];
      c.resize(len, 0.0);
      y[i] = Jet(std::move(c));
    }
    return y;
  };
  for (int k = 0; k < q; ++k) {
    const std::vector<Jet> rhs = problem.jet_field({}, jets(k + 1));
    for (int i = 0; i < d; ++i)
      if (mass(i, i) != 0.0) coeff[i].push_back(rhs[i][k] / ((k + 1) * mass(i, i)));
    if (na == 0) continue;
    for (int i : algebraic) coeff[i].push_back(0.0);
    const std::vector<Jet> probe = problem.jet_field({}, jets(k + 2));
    Vector r(na);
    for (Eigen::Index a = 0; a < na; ++a) r(a) = probe[algebraic[a]][k + 1];
    const Vector step = lu.solve(-r);
    for (Eigen::Index a = 0; a < na; ++a) coeff[algebraic[a]].back() = step(a);
  }
  return to_derivatives(coeff, d, q);
}

}  // namespace

std::vector<Vector> taylor_coefficients(const IVProblem& problem, int q) {
  if (!problem.jet_field) {
    throw Error(ErrorCode::UnsupportedField,
                "problem '" + problem.name + "' has no jet representation of its field");
  }
  if (problem.is_dae()) return dae_taylor_coefficients(problem, q);
  const int d = problem.dim;

  // Normalized coefficients c_k = y^(k)(t0) / k!; order-2 problems are lifted
  // to u = (y, y') for the recursion.
  const bool lifted = problem.order == 2;
  const int n = lifted ? 2 * d : d;
  std::vector<std::vector<double>> coeff(n);
  for (int i = 0; i < d; ++i) {
    coeff[i].push_back(problem.y0(i));
    if (lifted) coeff[d + i].push_back(problem.dy0(i));
  }

  for (int k = 0; k < q; ++k) {
    std::vector<Jet> y(d), dy;
    for (int i = 0; i < d; ++i) y[i] = Jet(coeff[i]);
    std::vector<Jet> rhs;
    if (lifted) {
      dy.resize(d);
      for (int i = 0; i < d; ++i) dy[i] = Jet(coeff[d + i]);
      std::vector<Jet> acc = problem.jet_field(dy, y);
      rhs = dy;
      rhs.insert(rhs.end(), acc.begin(), acc.end());
    } else {
      rhs = problem.jet_field(dy, y);
    }
    for (int i = 0; i < n; ++i) coeff[i].push_back(rhs[i][k] / (k + 1));
  }
  return to_derivatives(coeff, d, q);
}

GaussianSqrt initial_state(const IVProblem& problem, int q) {
  const int d = problem.dim;
  if (problem.jet_field) {
    try {
      const std::vector<Vector> c = taylor_coefficients(problem, q);
      GaussianSqrt state{Vector::Zero(IWPModel(d, q).state_dim()), Matrix::Zero(0, 0)};
      for (int k = 0; k <= q; ++k) state.mean.segment(static_cast<Eigen::Index>(k) * d, d) = c[k];
      state.rfactor = Matrix::Zero(state.mean.size(), state.mean.size());
      if (state.mean.allFinite()) return state;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnsupportedField && e.code() != ErrorCode::NonFiniteField) throw;
    }
  }
  return fallback_initial_state(problem, q);
}

GaussianSqrt fallback_initial_state(const IVProblem& problem, int q) {
  const int d = problem.dim;
  const IWPModel model(d, q);
  const Eigen::Index dim = model.state_dim();
  GaussianSqrt state{Vector::Zero(dim), Matrix::Zero(dim, dim)};
  const double root_kappa = std::sqrt(kInitialVariance);
  Matrix factor = Matrix::Zero(dim, dim);
  state.mean.head(d) = problem.y0;
  int first_unknown = 2;
  if (problem.order == 2) {
    state.mean.segment(d, d) = problem.dy0;
    if (q >= 2) {
      state.mean.segment(2 * d, d) = problem.f(problem.dy0, problem.y0);
      first_unknown = 3;
    }
  } else {
    const Matrix mass = problem.mass.value_or(Matrix::Identity(d, d));
    const Matrix mass_pinv = nonsquare_pinv(mass);
    state.mean.segment(d, d) = mass_pinv * problem.f(Vector(), problem.y0);
    // Components of Y1 outside the row space of M are not identified by M v = f.
    const Matrix null_projector = Matrix::Identity(d, d) - mass_pinv * mass;
    factor.block(d, d, d, d) = root_kappa * null_projector;
  }
  for (int k = first_unknown; k <= q; ++k) {
    factor.block(static_cast<Eigen::Index>(k) * d, static_cast<Eigen::Index>(k) * d, d, d) =
        root_kappa * Matrix::Identity(d, d);
  }
  state.rfactor = triangularize(factor);
  return state;
}

}  // namespace pnode
