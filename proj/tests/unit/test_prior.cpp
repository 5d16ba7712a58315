#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "pnode/error.hpp"
#include "pnode/prior.hpp"
#include "pnode/problems.hpp"

using pnode::Matrix;
using pnode::Vector;

namespace {

double rel_entry_error(const Matrix& got, const Matrix& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.rows(); ++i)
    for (Eigen::Index j = 0; j < want.cols(); ++j) {
      const double w = want(i, j);
      const double e = std::abs(got(i, j) - w);
      worst = std::max(worst, w == 0.0 ? e : e / std::abs(w));
    }
  return worst;
}

// k-th time derivative of 1 / (1 + 99 exp(-3t)) at t = 0, differentiating the
// series sum_n (-1)^(n+1) exp(n (3t - log 99)) term by term.
double logistic_derivative(int k) {
  double acc = 0.0;
  for (int n = 1; n <= 80; ++n) {
    const double sign = n % 2 == 1 ? 1.0 : -1.0;
    acc += sign * std::pow(3.0 * n, k) * std::pow(99.0, -n);
  }
  return acc;
}

pnode::IVProblem linear_problem(double lambda, int d) {
  pnode::IVProblem p;
  p.name = "linear";
  p.dim = d;
  p.f = [lambda](const Vector&, const Vector& y) { return Vector(lambda * y); };
  p.df_dy = [lambda, d](const Vector&, const Vector&) { return Matrix(lambda * Matrix::Identity(d, d)); };
  p.jet_field = [lambda](const std::vector<pnode::Jet>&, const std::vector<pnode::Jet>& y) {
    std::vector<pnode::Jet> out;
    for (const auto& v : y) out.push_back(lambda * v);
    return out;
  };
  p.y0 = Vector::LinSpaced(d, 1.0, 2.0);
  p.t1 = 1.0;
  return p;
}

}  // namespace

TEST_CASE("transition examples") {
  const auto t = pnode::iwp_transition(1, 1.0);
  Matrix a(2, 2), q(2, 2);
  a << 1, 1, 0, 1;
  q << 1.0 / 3, 0.5, 0.5, 1;
  CHECK((t.a - a).norm() < 1e-15);
  CHECK((t.q - q).norm() < 1e-15);

  for (int order = 1; order <= 5; ++order) {
    const auto z = pnode::iwp_transition(order, 0.0);
    CHECK(z.a.isIdentity());
    CHECK(oracle::max_abs(z.q) == 0.0);
  }
}

TEST_CASE("transition matches the quadrature oracle") {
  for (int q = 1; q <= 5; ++q)
    for (double h : {0.01, 0.5, 2.0}) {
      CAPTURE(q);
      CAPTURE(h);
      const auto t = pnode::iwp_transition(q, h);
      CHECK(rel_entry_error(t.a, oracle::shift_exponential(q, h)) <= 1e-9);
      const Matrix qq = oracle::iwp_process_noise(q, h);
      CHECK(rel_entry_error(t.q, qq) <= 1e-9);
      CHECK(rel_entry_error(t.q_sqrt.transpose() * t.q_sqrt, qq) <= 1e-9);
    }
}

TEST_CASE("transition semigroup") {
  for (int q = 1; q <= 4; ++q) {
    const Matrix ab = pnode::iwp_transition(q, 0.3).a * pnode::iwp_transition(q, 0.45).a;
    CHECK((ab - pnode::iwp_transition(q, 0.75).a).norm() < 1e-14);
  }
}

TEST_CASE("preconditioner examples and identities") {
  const auto p1 = pnode::preconditioner(1, 1.0);
  CHECK((p1.t - Vector::Ones(2)).norm() < 1e-15);
  CHECK((p1.q_bar - pnode::iwp_transition(1, 1.0).q).norm() < 1e-15);
  CHECK(pnode::preconditioner(2, 0.7).q_bar(0, 0) == doctest::Approx(0.2));

  const auto p3 = pnode::preconditioner(3, 0.25);
  const Matrix a3 = p3.t.asDiagonal() * p3.a_bar * p3.t_inv.asDiagonal();
  const Matrix ref3 = pnode::iwp_transition(3, 0.25).a;
  const auto inf_norm = [](const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); };
  CHECK(inf_norm(a3 - ref3) <= 1e-12 * inf_norm(ref3));

  for (int q = 1; q <= 8; ++q)
    for (double h : {0.01, 0.3, 1.0, 4.0}) {
      CAPTURE(q);
      CAPTURE(h);
      const auto p = pnode::preconditioner(q, h);
      const auto t = pnode::iwp_transition(q, h);
      CHECK(rel_entry_error(p.t.asDiagonal() * p.a_bar * p.t_inv.asDiagonal(), t.a) <= 1e-12);
      CHECK(rel_entry_error(p.t.asDiagonal() * p.q_bar * p.t.asDiagonal(), t.q) <= 1e-12);
      CHECK(rel_entry_error(p.q_bar_sqrt.transpose() * p.q_bar_sqrt, p.q_bar) <= 1e-10);
      for (int i = 0; i <= q; ++i) CHECK(p.t(i) * p.t_inv(i) == doctest::Approx(1.0));
    }
}

TEST_CASE("kronecker structure on derivative-major states") {
  oracle::Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const int q = rng.integer(1, 5), d = rng.integer(1, 6);
    const Matrix small = rng.matrix(q + 1, q + 1);
    Matrix explicit_kron = Matrix::Zero((q + 1) * d, (q + 1) * d);
    for (int i = 0; i <= q; ++i)
      for (int j = 0; j <= q; ++j)
        for (int k = 0; k < d; ++k) explicit_kron(i * d + k, j * d + k) = small(i, j);
    CHECK((pnode::kron_identity(small, d) - explicit_kron).norm() == 0.0);

    const Vector x = rng.vector((q + 1) * d);
    Vector blockwise = Vector::Zero(x.size());
    for (int i = 0; i <= q; ++i)
      for (int j = 0; j <= q; ++j) blockwise.segment(i * d, d) += small(i, j) * x.segment(j * d, d);
    CHECK((blockwise - explicit_kron * x).cwiseAbs().maxCoeff() <= 1e-13 * (1.0 + blockwise.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("projection selects derivative blocks") {
  const int d = 3, q = 2;
  for (int idx = 0; idx <= q; ++idx) {
    const pnode::Projection e{idx};
    const Matrix m = e.matrix(d, q);
    REQUIRE(m.rows() == d);
    REQUIRE(m.cols() == d * (q + 1));
    for (int k = 0; k < d * (q + 1); ++k) {
      const Vector unit = Vector::Unit(d * (q + 1), k);
      const Vector want = (k / d == idx) ? Vector(Vector::Unit(d, k % d)) : Vector(Vector::Zero(d));
      CHECK((m * unit - want).norm() == 0.0);
      CHECK((e.apply(unit, d) - want).norm() == 0.0);
    }
  }
}

TEST_CASE("preconditioned prediction equals the direct one") {
  oracle::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int q = rng.integer(1, 5), d = rng.integer(1, 4);
    const double h = rng.uniform(0.01, 2.0);
    const pnode::IWPModel model(d, q, 1.0);
    const pnode::GaussianSqrt s(rng.vector(model.state_dim()), rng.rfactor(model.state_dim()));
    const auto tr = pnode::state_transition(model, h);
    const auto direct = pnode::predict(s, tr.a, tr.q_sqrt);
    const auto pre = pnode::predict_preconditioned(s, model, h);
    CHECK((direct.mean - pre.mean).norm() <= 1e-12 * (1.0 + direct.mean.norm()));
    const Matrix cd = direct.covariance();
    CHECK(oracle::max_abs(cd - pre.covariance()) <= 1e-11 * (1.0 + oracle::max_abs(cd)));
  }
}

TEST_CASE("logistic Taylor coefficients") {
  const auto p = pnode::load_problem("logistic");
  const auto c = pnode::taylor_coefficients(p, 5);
  REQUIRE(c.size() == 6);
  CHECK(c[0](0) == doctest::Approx(0.01));
  CHECK(c[1](0) == doctest::Approx(0.0297).epsilon(1e-14));
  CHECK(c[2](0) == doctest::Approx(0.087318).epsilon(1e-12));
  for (int k = 0; k <= 5; ++k) {
    CAPTURE(k);
    const double want = logistic_derivative(k);
    CHECK(std::abs(c[k](0) - want) <= 1e-10 * std::abs(want));
  }
}

TEST_CASE("linear field Taylor coefficients") {
  const double lambda = -0.7;
  const auto p = linear_problem(lambda, 3);
  const auto c = pnode::taylor_coefficients(p, 6);
  for (int k = 0; k <= 6; ++k) CHECK((c[k] - std::pow(lambda, k) * p.y0).norm() < 1e-14);
}

TEST_CASE("second-order Taylor coefficients") {
  // y'' = -y, y(0) = 1, y'(0) = 0 -> cos
  pnode::IVProblem p;
  p.name = "osc";
  p.order = 2;
  p.dim = 1;
  p.f = [](const Vector&, const Vector& y) { return Vector(-y); };
  p.jet_field = [](const std::vector<pnode::Jet>&, const std::vector<pnode::Jet>& y) {
    return std::vector<pnode::Jet>{-y[0]};
  };
  p.y0 = Vector::Constant(1, 1.0);
  p.dy0 = Vector::Constant(1, 0.0);
  const auto c = pnode::taylor_coefficients(p, 6);
  const double cosd[] = {1, 0, -1, 0, 1, 0, -1};
  for (int k = 0; k <= 6; ++k) CHECK(c[k](0) == doctest::Approx(cosd[k]).epsilon(1e-14));
}

TEST_CASE("fields without jets are unsupported") {
  auto p = linear_problem(1.0, 1);
  p.jet_field = nullptr;
  bool threw = false;
  try {
    pnode::taylor_coefficients(p, 3);
  } catch (const pnode::Error& e) {
    threw = e.code() == pnode::ErrorCode::UnsupportedField;
  }
  CHECK(threw);
  // initial_state falls back instead of failing
  const auto s = pnode::initial_state(p, 3);
  CHECK(s.mean(0) == p.y0(0));
  CHECK(s.mean(1) == doctest::Approx(p.y0(0)));
  CHECK(s.covariance()(2, 2) == doctest::Approx(pnode::kInitialVariance));
}

TEST_CASE("initial state is exact when jets are available") {
  const auto logistic = pnode::load_problem("logistic");
  const auto s = pnode::initial_state(logistic, 3);
  CHECK(s.mean.size() == 4);
  CHECK(oracle::max_abs(s.rfactor) == 0.0);

  const auto pl = pnode::load_problem("pleiades");
  const auto sp = pnode::initial_state(pl, 4);
  const double x0[] = {3, 3, -1, -3, 2, -2, 2};
  const double y0[] = {3, -3, 2, 0, 0, -4, 4};
  const double vx0[] = {0, 0, 0, 0, 0, 1.75, -1.5};
  const double vy0[] = {0, 0, 0, -1.25, 1, 0, 0};
  for (int i = 0; i < 7; ++i) {
    CHECK(sp.mean(i) == x0[i]);
    CHECK(sp.mean(7 + i) == y0[i]);
    CHECK(sp.mean(14 + i) == vx0[i]);
    CHECK(sp.mean(21 + i) == vy0[i]);
  }
  CHECK(oracle::max_abs(sp.rfactor) == 0.0);
}

TEST_CASE("fallback initialization of the Robertson DAE") {
  const auto p = pnode::load_problem("robertson");
  const auto s = pnode::fallback_initial_state(p, 3);
  CHECK(s.mean(0) == 1.0);
  CHECK(s.mean(1) == 0.0);
  CHECK(s.mean(2) == 0.0);
  CHECK(s.mean(3) == doctest::Approx(-0.04));
  CHECK(s.mean(4) == doctest::Approx(0.04));
  CHECK(s.mean(5) == 0.0);
  const Matrix cov = s.covariance();
  for (int i = 0; i < 3; ++i) CHECK(cov(i, i) == 0.0);
  CHECK(cov(3, 3) == doctest::Approx(0.0));
  CHECK(cov(4, 4) == doctest::Approx(0.0));
  CHECK(cov(5, 5) == doctest::Approx(pnode::kInitialVariance));
  for (int i = 6; i < 12; ++i) CHECK(cov(i, i) == doctest::Approx(pnode::kInitialVariance));
}

TEST_CASE("jet initialization of the DAEs is consistent") {
  const auto rob = pnode::load_problem("robertson");
  const auto c = pnode::taylor_coefficients(rob, 4);
  CHECK(c[1](0) == doctest::Approx(-0.04));
  CHECK(c[1](1) == doctest::Approx(0.04));
  // differentiated constraint y1 + y2 + y3 = 1
  for (int k = 1; k <= 4; ++k) CHECK(std::abs(c[k].sum()) < 1e-12 * (1.0 + c[k].cwiseAbs().maxCoeff()));

  const auto pend = pnode::load_problem("pendulum_dae");
  const auto s = pnode::initial_state(pend, 3);
  CHECK(oracle::max_abs(s.rfactor) == 0.0);
  CHECK(pnode::algebraic_residual(pend, s.mean.head(5)).norm() < 1e-14);
}
