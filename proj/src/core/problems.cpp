#include "pnode/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pnode/error.hpp"
#include "pnode/infoops.hpp"

namespace pnode {

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Wraps a generic first-order field template for doubles and jets.
template <class Body>
void set_first_order_field(IVProblem& p, Body body) {
  p.f = [body](const Vector&, const Vector& y) { return to_vector(body(to_std(y))); };
  p.jet_field = [body](const std::vector<Jet>&, const std::vector<Jet>& y) { return body(y); };
}

template <class Body>
void set_second_order_field(IVProblem& p, Body body) {
  p.f = [body](const Vector& dy, const Vector& y) { return to_vector(body(to_std(dy), to_std(y))); };
  p.jet_field = [body](const std::vector<Jet>& dy, const std::vector<Jet>& y) { return body(dy, y); };
}

// ---------------------------------------------------------------- logistic

IVProblem logistic() {
  IVProblem p;
  p.name = "logistic";
  p.order = 1;
  p.dim = 1;
  set_first_order_field(p, [](const auto& y) {
    using T = std::decay_t<decltype(y[0])>;
    return std::vector<T>{3.0 * y[0] * (1.0 - y[0])};
  });
  p.df_dy = [](const Vector&, const Vector& y) { return Matrix::Constant(1, 1, 3.0 - 6.0 * y(0)); };
  p.jff_jacobian = [](const Vector& y) {
    const double v = y(0);
    const double j = 3.0 - 6.0 * v;
    return Matrix::Constant(1, 1, -18.0 * v * (1.0 - v) + j * j);
  };
  p.y0 = Vector::Constant(1, 0.01);
  p.t0 = 0.0;
  p.t1 = 3.0;
  p.analytic = [](double t) {
    const double e = std::exp(3.0 * t);
    return Vector::Constant(1, e / (99.0 + e));
  };
  return p;
}

// ----------------------------------------------------------- lotka volterra

IVProblem lotka_volterra() {
  IVProblem p;
  p.name = "lotka_volterra";
  p.order = 1;
  p.dim = 2;
  set_first_order_field(p, [](const auto& u) {
    using T = std::decay_t<decltype(u[0])>;
    return std::vector<T>{1.5 * u[0] - u[0] * u[1], u[0] * u[1] - 3.0 * u[1]};
  });
  auto jac = [](const Vector& u) {
    Matrix j(2, 2);
    j << 1.5 - u(1), -u(0), u(1), u(0) - 3.0;
    return j;
  };
  p.df_dy = [jac](const Vector&, const Vector& u) { return jac(u); };
  p.jff_jacobian = [jac, f = p.f](const Vector& u) {
    const Vector fu = f(Vector(), u);
    const Matrix j = jac(u);
    Matrix second(2, 2);
    second << -fu(1), -fu(0), fu(1), fu(0);
    return Matrix(j * j + second);
  };
  p.y0 = Vector::Ones(2);
  p.t1 = 7.0;
  return p;
}

// ---------------------------------------------------------------- van der pol

constexpr double kVdpStiffness = 1e6;

IVProblem vanderpol() {
  IVProblem p;
  p.name = "vanderpol";
  p.order = 1;
  p.dim = 2;
  p.stiff = true;
  set_first_order_field(p, [](const auto& u) {
    using T = std::decay_t<decltype(u[0])>;
    return std::vector<T>{u[1], kVdpStiffness * ((1.0 - u[0] * u[0]) * u[1] - u[0])};
  });
  auto jac = [](const Vector& u) {
    Matrix j(2, 2);
    j << 0.0, 1.0, kVdpStiffness * (-2.0 * u(0) * u(1) - 1.0), kVdpStiffness * (1.0 - u(0) * u(0));
    return j;
  };
  p.df_dy = [jac](const Vector&, const Vector& u) { return jac(u); };
  p.jff_jacobian = [jac, f = p.f](const Vector& u) {
    const Vector fu = f(Vector(), u);
    const Matrix j = jac(u);
    Matrix second = Matrix::Zero(2, 2);
    second(1, 0) = -2.0 * kVdpStiffness * (u(1) * fu(0) + u(0) * fu(1));
    second(1, 1) = -2.0 * kVdpStiffness * u(0) * fu(0);
    return Matrix(j * j + second);
  };
  p.y0 = Vector(2);
  p.y0 << 0.0, std::sqrt(3.0);
  p.t1 = 10.0;
  return p;
}

// ---------------------------------------------------------------- pleiades

IVProblem pleiades() {
  IVProblem p;
  p.name = "pleiades";
  p.order = 2;
  p.dim = 14;
  // u = (x_1..x_7, y_1..y_7), masses m_i = i
  set_second_order_field(p, [](const auto&, const auto& u) {
    using T = std::decay_t<decltype(u[0])>;
    using std::pow;
    std::vector<T> acc(14, u[0] * 0.0);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) {
        if (i == j) continue;
        const T dx = u[j] - u[i];
        const T dy = u[7 + j] - u[7 + i];
        const T w = pow(dx * dx + dy * dy, -1.5) * static_cast<double>(j + 1);
        acc[i] += w * dx;
        acc[7 + i] += w * dy;
      }
    }
    return acc;
  });
  p.df_dy = [](const Vector&, const Vector& u) {
    Matrix jac = Matrix::Zero(14, 14);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) {
        if (i == j) continue;
        const double dx = u(j) - u(i);
        const double dy = u(7 + j) - u(7 + i);
        const double r2 = dx * dx + dy * dy;
        const double m = j + 1.0;
        const double r3 = std::pow(r2, -1.5);
        const double r5 = std::pow(r2, -2.5);
        const double xx = m * (r3 - 3.0 * dx * dx * r5);
        const double yy = m * (r3 - 3.0 * dy * dy * r5);
        const double xy = -3.0 * m * dx * dy * r5;
        jac(i, j) += xx;
        jac(i, i) -= xx;
        jac(i, 7 + j) += xy;
        jac(i, 7 + i) -= xy;
        jac(7 + i, j) += xy;
        jac(7 + i, i) -= xy;
        jac(7 + i, 7 + j) += yy;
        jac(7 + i, 7 + i) -= yy;
      }
    }
    return jac;
  };
  p.df_ddy = [](const Vector&, const Vector&) { return Matrix(Matrix::Zero(14, 14)); };
  p.y0 = Vector(14);
  p.y0 << 3, 3, -1, -3, 2, -2, 2, 3, -3, 2, 0, 0, -4, 4;
  p.dy0 = Vector(14);
  p.dy0 << 0, 0, 0, 0, 0, 1.75, -1.5, 0, 0, 0, -1.25, 1, 0, 0;
  p.t1 = 3.0;
  return p;
}

// ------------------------------------------------------------ henon heiles

double henon_heiles_energy(const Vector& p, const Vector& q) {
  return 0.5 * p.squaredNorm() + 0.5 * q.squaredNorm() + q(0) * q(0) * q(1) - q(1) * q(1) * q(1) / 3.0;
}

IVProblem henon_heiles() {
  IVProblem p;
  p.name = "henon_heiles";
  p.order = 2;
  p.dim = 2;
  set_second_order_field(p, [](const auto&, const auto& y) {
    using T = std::decay_t<decltype(y[0])>;
    return std::vector<T>{-y[0] - 2.0 * y[0] * y[1], y[1] * y[1] - y[1] - y[0] * y[0]};
  });
  p.df_dy = [](const Vector&, const Vector& y) {
    Matrix j(2, 2);
    j << -1.0 - 2.0 * y(1), -2.0 * y(0), -2.0 * y(0), 2.0 * y(1) - 1.0;
    return j;
  };
  p.df_ddy = [](const Vector&, const Vector&) { return Matrix(Matrix::Zero(2, 2)); };
  p.y0 = Vector(2);
  p.y0 << 0.0, 0.1;
  p.dy0 = Vector(2);
  p.dy0 << 0.5, 0.0;
  p.t1 = 1000.0;

  const double h0 = henon_heiles_energy(p.dy0, p.y0);
  Invariants inv;
  inv.count = 1;
  inv.g = [h0](const Vector& dy, const Vector& y) {
    return Vector::Constant(1, henon_heiles_energy(dy, y) - h0);
  };
  inv.dg_dy = [](const Vector&, const Vector& q) {
    Matrix j(1, 2);
    j << q(0) + 2.0 * q(0) * q(1), q(1) + q(0) * q(0) - q(1) * q(1);
    return j;
  };
  inv.dg_ddy = [](const Vector& dy, const Vector&) { return Matrix(dy.transpose()); };
  p.invariants = inv;
  return p;
}

// ------------------------------------------------------------------ kepler

Vector kepler_invariants(const Vector& p, const Vector& q) {
  Vector out(2);
  out << 0.5 * p.squaredNorm() - 1.0 / q.norm(), q(0) * p(1) - q(1) * p(0);
  return out;
}

IVProblem kepler() {
  IVProblem p;
  p.name = "kepler";
  p.order = 2;
  p.dim = 2;
  set_second_order_field(p, [](const auto&, const auto& y) {
    using T = std::decay_t<decltype(y[0])>;
    using std::pow;
    const T scale = pow(y[0] * y[0] + y[1] * y[1], -1.5);
    return std::vector<T>{-(y[0] * scale), -(y[1] * scale)};
  });
  p.df_dy = [](const Vector&, const Vector& y) {
    const double r2 = y.squaredNorm();
    const double r3 = std::pow(r2, -1.5);
    const double r5 = std::pow(r2, -2.5);
    return Matrix(-r3 * Matrix::Identity(2, 2) + 3.0 * r5 * y * y.transpose());
  };
  p.df_ddy = [](const Vector&, const Vector&) { return Matrix(Matrix::Zero(2, 2)); };
  p.y0 = Vector(2);
  p.y0 << 0.4, 0.0;
  p.dy0 = Vector(2);
  p.dy0 << 0.0, 2.0;
  p.t1 = 0.99 * 2.0 * std::numbers::pi;

  const Vector anchor = kepler_invariants(p.dy0, p.y0);
  Invariants inv;
  inv.count = 2;
  inv.g = [anchor](const Vector& dy, const Vector& y) { return Vector(kepler_invariants(dy, y) - anchor); };
  inv.dg_dy = [](const Vector& dy, const Vector& q) {
    Matrix j(2, 2);
    const double r3 = std::pow(q.squaredNorm(), -1.5);
    j << q(0) * r3, q(1) * r3, dy(1), -dy(0);
    return j;
  };
  inv.dg_ddy = [](const Vector& dy, const Vector& q) {
    Matrix j(2, 2);
    j << dy(0), dy(1), -q(1), q(0);
    return j;
  };
  p.invariants = inv;
  return p;
}

// --------------------------------------------------------------- robertson

IVProblem robertson() {
  static constexpr double k1 = 0.04, k2 = 3e7, k3 = 1e4;
  IVProblem p;
  p.name = "robertson";
  p.order = 1;
  p.dim = 3;
  p.stiff = true;
  p.mass = Matrix(Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal());
  set_first_order_field(p, [](const auto& y) {
    using T = std::decay_t<decltype(y[0])>;
    return std::vector<T>{-k1 * y[0] + k3 * y[1] * y[2], k1 * y[0] - k3 * y[1] * y[2] - k2 * y[1] * y[1],
                          y[0] + y[1] + y[2] - 1.0};
  });
  p.df_dy = [](const Vector&, const Vector& y) {
    Matrix j(3, 3);
    j << -k1, k3 * y(2), k3 * y(1), k1, -k3 * y(2) - 2.0 * k2 * y(1), -k3 * y(1), 1.0, 1.0, 1.0;
    return j;
  };
  p.y0 = Vector(3);
  p.y0 << 1.0, 0.0, 0.0;
  p.t1 = 1e2;
  return p;
}

// ------------------------------------------------------------ pendulum dae

IVProblem pendulum_dae() {
  static constexpr double g = 9.81;
  IVProblem p;
  p.name = "pendulum_dae";
  p.order = 1;
  p.dim = 5;
  p.stiff = true;
  Vector diag = Vector::Ones(5);
  diag(4) = 0.0;
  p.mass = Matrix(diag.asDiagonal());
  // (x, v_x, y, v_y, T)
  set_first_order_field(p, [](const auto& u) {
    using T = std::decay_t<decltype(u[0])>;
    const T& x = u[0];
    const T& vx = u[1];
    const T& y = u[2];
    const T& vy = u[3];
    const T& tension = u[4];
    return std::vector<T>{vx, x * tension, vy, y * tension - g,
                          2.0 * (vx * vx + vy * vy + y * (y * tension - g) + tension * x * x)};
  });
  p.df_dy = [](const Vector&, const Vector& u) {
    const double x = u(0), vx = u(1), y = u(2), vy = u(3), tension = u(4);
    Matrix j = Matrix::Zero(5, 5);
    j(0, 1) = 1.0;
    j(1, 0) = tension;
    j(1, 4) = x;
    j(2, 3) = 1.0;
    j(3, 2) = tension;
    j(3, 4) = y;
    j(4, 0) = 4.0 * tension * x;
    j(4, 1) = 4.0 * vx;
    j(4, 2) = 2.0 * (2.0 * y * tension - g);
    j(4, 3) = 4.0 * vy;
    j(4, 4) = 2.0 * (y * y + x * x);
    return j;
  };
  p.y0 = Vector::Zero(5);
  p.y0(0) = 1.0;
  p.t1 = 10.0;
  return p;
}

std::vector<Vector> gated_stiff_reference(const IVProblem& problem, const std::vector<double>& t_points,
                                          double tol) {
  static constexpr double kGate = 1e-7;
  auto rhs = [&](const Vector& y) { return problem.f(Vector(), y); };
  auto jac = [&](const Vector& y) { return problem.df_dy(Vector(), y); };
  const Matrix mass = problem.mass.value_or(Matrix::Identity(problem.dim, problem.dim));
  const std::vector<Vector> coarse = radau5(rhs, jac, mass, problem.y0, problem.t0, t_points, tol, tol);
  std::vector<Vector> fine = radau5(rhs, jac, mass, problem.y0, problem.t0, t_points, 0.1 * tol, 0.1 * tol);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const double scale = std::max(fine[i].norm(), 1e-300);
    if ((coarse[i] - fine[i]).norm() > kGate * scale) {
      throw Error(ErrorCode::ReferenceInconsistent,
                  "reference for '" + problem.name + "' failed the self-consistency gate at t = " +
                      std::to_string(t_points[i]));
    }
  }
  return fine;
}

}  // namespace

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {"pleiades", "logistic", "lotka_volterra", "vanderpol",
                                                 "henon_heiles", "kepler", "robertson", "pendulum_dae"};
  return names;
}

IVProblem load_problem(const std::string& name) {
  if (name == "pleiades") return pleiades();
  if (name == "logistic") return logistic();
  if (name == "lotka_volterra") return lotka_volterra();
  if (name == "vanderpol") return vanderpol();
  if (name == "henon_heiles") return henon_heiles();
  if (name == "kepler") return kepler();
  if (name == "robertson") return robertson();
  if (name == "pendulum_dae") return pendulum_dae();
  throw Error(ErrorCode::UnknownProblem, "unknown problem '" + name + "'");
}

IVProblem first_order_twin(const IVProblem& problem) {
  if (problem.order != 2) throw Error(ErrorCode::InvalidArgument, "first-order twin needs an order-2 problem");
  const int d = problem.dim;
  IVProblem twin;
  twin.name = problem.name;
  twin.order = 1;
  twin.dim = 2 * d;
  twin.stiff = problem.stiff;
  twin.first_order_twin = true;
  twin.t0 = problem.t0;
  twin.t1 = problem.t1;
  twin.y0 = Vector(2 * d);
  twin.y0 << problem.dy0, problem.y0;

  const Field f = problem.f;
  twin.f = [f, d](const Vector&, const Vector& u) {
    Vector out(2 * d);
    out << f(u.head(d), u.tail(d)), u.head(d);
    return out;
  };
  if (problem.df_dy) {
    const FieldJacobian jy = problem.df_dy;
    const FieldJacobian jdy = problem.df_ddy;
    twin.df_dy = [jy, jdy, f, d](const Vector&, const Vector& u) {
      const Vector dy = u.head(d), y = u.tail(d);
      Matrix j = Matrix::Zero(2 * d, 2 * d);
      j.topLeftCorner(d, d) =
          jdy ? jdy(dy, y) : finite_difference_jacobian([&](const Vector& v) { return f(v, y); }, dy);
      j.topRightCorner(d, d) = jy(dy, y);
      j.bottomLeftCorner(d, d).setIdentity();
      return j;
    };
  }
  if (problem.jet_field) {
    const JetField jf = problem.jet_field;
    twin.jet_field = [jf, d](const std::vector<Jet>&, const std::vector<Jet>& u) {
      std::vector<Jet> dy(u.begin(), u.begin() + d), y(u.begin() + d, u.end());
      std::vector<Jet> out = jf(dy, y);
      out.insert(out.end(), dy.begin(), dy.end());
      return out;
    };
  }
  if (problem.invariants) {
    const Invariants inv = *problem.invariants;
    Invariants lifted;
    lifted.count = inv.count;
    lifted.g = [inv, d](const Vector&, const Vector& u) { return inv.g(u.head(d), u.tail(d)); };
    lifted.dg_dy = [inv, d](const Vector&, const Vector& u) {
      Matrix j(inv.count, 2 * d);
      j << inv.dg_ddy(u.head(d), u.tail(d)), inv.dg_dy(u.head(d), u.tail(d));
      return j;
    };
    lifted.dg_ddy = [inv, d](const Vector&, const Vector&) { return Matrix(Matrix::Zero(inv.count, 2 * d)); };
    twin.invariants = lifted;
  }
  return twin;
}

Vector analytic_solution(const IVProblem& problem, double t) {
  if (!problem.analytic) {
    throw Error(ErrorCode::NoAnalyticSolution, "problem '" + problem.name + "' has no closed-form solution");
  }
  return problem.analytic(t);
}

Vector algebraic_residual(const IVProblem& problem, const Vector& y) {
  if (!problem.mass) return {};
  const Vector fy = problem.f(Vector(), y);
  std::vector<double> rows;
  for (Eigen::Index i = 0; i < problem.mass->rows(); ++i) {
    if (problem.mass->row(i).isZero(0.0)) rows.push_back(fy(i));
  }
  return to_vector(rows);
}

std::vector<Vector> dopri5(const std::function<Vector(const Vector&)>& f, const Vector& y0, double t0,
                           const std::vector<double>& t_points, double rtol, double atol, long* n_steps) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  std::vector<Vector> out;
  out.reserve(t_points.size());
  Vector y = y0;
  double t = t0;
  Vector k1 = f(y);
  const double span = t_points.empty() ? 0.0 : t_points.back() - t0;
  double h = span > 0 ? 1e-4 * span : 0.0;
  long steps = 0;

  for (double target : t_points) {
    while (t < target) {
      const bool last = t + h >= target;
      const double step = last ? target - t : h;
      const Vector k2 = f(y + step * a21 * k1);
      const Vector k3 = f(y + step * (a31 * k1 + a32 * k2));
      const Vector k4 = f(y + step * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vector k5 = f(y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vector k6 = f(y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vector y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vector k7 = f(y_new);
      const Vector err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Vector sc = (atol + rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
      const double norm = std::sqrt(err.cwiseQuotient(sc).squaredNorm() / static_cast<double>(err.size()));
      if (!std::isfinite(norm)) {
        h *= 0.5;
        continue;
      }
      const double factor = std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -0.2), 0.2, 10.0);
      if (norm <= 1.0) {
        t = last ? target : t + step;
        y = y_new;
        k1 = k7;
        ++steps;
        if (!last) h = step * factor;
      } else {
        h = step * std::min(factor, 1.0);
      }
      if (h < 1e-14 * std::max(span, 1.0)) throw Error(ErrorCode::StepUnderflow, "dopri5 step size underflow");
    }
    out.push_back(y);
  }
  if (n_steps) *n_steps = steps;
  return out;
}

namespace {

// One Radau IIA step of size h from y; false when the simplified Newton
// iteration does not converge.
bool radau_step(const std::function<Vector(const Vector&)>& f, const Matrix& jac, const Matrix& mass,
                const Vector& y, double h, const Vector& scale, Vector& y_new, long& fevals) {
  static const double s6 = std::sqrt(6.0);
  static const Eigen::Matrix3d a = (Eigen::Matrix3d() << (88.0 - 7.0 * s6) / 360.0,
                                    (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0,
                                    (296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0,
                                    (-2.0 - 3.0 * s6) / 225.0, (16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0)
                                       .finished();
  const Eigen::Index d = y.size();
  Matrix newton(3 * d, 3 * d);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      newton.block(i * d, j * d, d, d) = (i == j ? mass : Matrix::Zero(d, d)) - h * a(i, j) * jac;
  const Eigen::PartialPivLU<Matrix> lu(newton);

  Vector z = Vector::Zero(3 * d);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 10; ++iter) {
    Vector fz(3 * d);
    for (int i = 0; i < 3; ++i) fz.segment(i * d, d) = f(y + z.segment(i * d, d));
    fevals += 3;
    if (!fz.allFinite()) return false;
    Vector residual(3 * d);
    for (int i = 0; i < 3; ++i) {
      Vector acc = Vector::Zero(d);
      for (int j = 0; j < 3; ++j) acc += a(i, j) * fz.segment(j * d, d);
      residual.segment(i * d, d) = h * acc - mass * z.segment(i * d, d);
    }
    const Vector dz = lu.solve(residual);
    z += dz;
    double norm = 0.0;
    for (int i = 0; i < 3; ++i) norm = std::max(norm, dz.segment(i * d, d).cwiseQuotient(scale).cwiseAbs().maxCoeff());
    if (!std::isfinite(norm) || (iter > 1 && norm > previous)) return false;
    if (norm < 1e-3) {
      y_new = y + z.tail(d);
      return true;
    }
    previous = norm;
  }
  return false;
}

}  // namespace

std::vector<Vector> radau5(const std::function<Vector(const Vector&)>& f,
                           const std::function<Matrix(const Vector&)>& jacobian, const Matrix& mass,
                           const Vector& y0, double t0, const std::vector<double>& t_points, double rtol,
                           double atol, long* n_steps) {
  std::vector<Vector> out;
  out.reserve(t_points.size());
  Vector y = y0;
  double t = t0;
  const double span = t_points.empty() ? 0.0 : t_points.back() - t0;
  double h = span > 0 ? 1e-6 * span : 0.0;
  long steps = 0;
  long fevals = 0;

  for (double target : t_points) {
    while (t < target) {
      const bool last = t + h >= target;
      const double step = last ? target - t : h;
      const Vector scale = (atol + rtol * y.cwiseAbs().array()).matrix();
      const Matrix jac = jacobian(y);
      Vector big, half, two_halves;
      bool ok = radau_step(f, jac, mass, y, step, scale, big, fevals) &&
                radau_step(f, jac, mass, y, 0.5 * step, scale, half, fevals) &&
                radau_step(f, jacobian(half), mass, half, 0.5 * step, scale, two_halves, fevals);
      double norm = std::numeric_limits<double>::infinity();
      Vector err;
      if (ok) {
        // Step doubling: the difference estimates the order-5 local error of the two half steps.
        const Vector sc = (atol + rtol * y.cwiseAbs().cwiseMax(two_halves.cwiseAbs()).array()).matrix();
        err = (two_halves - big) / 31.0;
        norm = std::sqrt(err.cwiseQuotient(sc).squaredNorm() / static_cast<double>(err.size()));
      }
      if (ok && norm <= 1.0) {
        t = last ? target : t + step;
        y = two_halves + err;  // local extrapolation
        ++steps;
        if (!last) h = step * std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -1.0 / 6.0), 0.2, 5.0);
      } else {
        h = ok ? step * std::clamp(0.9 * std::pow(norm, -1.0 / 6.0), 0.2, 1.0) : 0.5 * step;
      }
      if (h < 1e-14 * std::max(span, 1.0)) throw Error(ErrorCode::StepUnderflow, "radau5 step size underflow");
    }
    out.push_back(y);
  }
  if (n_steps) *n_steps = steps;
  return out;
}

std::vector<Vector> reference_solution(const IVProblem& problem, const std::vector<double>& t_points,
                                       double tol) {
  if (!(tol <= 1e-8)) throw Error(ErrorCode::InvalidArgument, "reference tolerance must be <= 1e-8");
  if (problem.stiff || problem.is_dae()) return gated_stiff_reference(problem, t_points, kStiffReferenceTol);

  if (problem.order == 1) {
    auto rhs = [&](const Vector& y) { return problem.f(Vector(), y); };
    return dopri5(rhs, problem.y0, problem.t0, t_points, tol, tol);
  }
  const int d = problem.dim;
  auto rhs = [&](const Vector& u) {
    Vector out(2 * d);
    out << problem.f(u.head(d), u.tail(d)), u.head(d);
    return out;
  };
  Vector u0(2 * d);
  u0 << problem.dy0, problem.y0;
  return dopri5(rhs, u0, problem.t0, t_points, tol, tol);
}

}  // namespace pnode
