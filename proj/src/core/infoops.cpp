#include "pnode/infoops.hpp"

#include <cmath>

#include "pnode/error.hpp"

namespace pnode {

namespace {

Vector block(const Vector& x, int d, int i) { return x.segment(static_cast<Eigen::Index>(i) * d, d); }

void add_block(Matrix& h, int col_block, int d, const Matrix& m) {
  h.middleCols(static_cast<Eigen::Index>(col_block) * d, d) += m;
}

Matrix selector(int rows, int d, int q, int i, const Matrix& coefficient) {
  Matrix h = Matrix::Zero(rows, static_cast<Eigen::Index>(d) * (q + 1));
  add_block(h, i, d, coefficient);
  return h;
}

FieldJacobian jacobian_or_fd(FieldJacobian jac, const Field& f, bool wrt_y, long* cost) {
  if (jac) {
    *cost = 1;
    return jac;
  }
  *cost = -2;  // marker: 2 d evaluations
  if (wrt_y) {
    return [f](const Vector& dy, const Vector& y) {
      return finite_difference_jacobian([&](const Vector& v) { return f(dy, v); }, y);
    };
  }
  return [f](const Vector& dy, const Vector& y) {
    return finite_difference_jacobian([&](const Vector& v) { return f(v, y); }, dy);
  };
}

long resolve_cost(long marker, int d) { return marker < 0 ? -marker * d : marker; }

void require_order(int q, int min_q, const char* what) {
  if (q < min_q) {
    throw Error(ErrorCode::OrderTooLow,
                std::string(what) + " operator needs q >= " + std::to_string(min_q));
  }
}

}  // namespace

InformationOperator::InformationOperator(std::string name, int out_dim, OperatorRole role,
                                         EvaluateFn evaluate, LinearizeFn linearize, WorkCost cost)
    : name_(std::move(name)),
      out_dim_(out_dim),
      role_(role),
      evaluate_(std::move(evaluate)),
      linearize_(std::move(linearize)),
      cost_(cost) {}

Vector InformationOperator::evaluate(double t, const Vector& x) const {
  Vector z = evaluate_(t, x);
  if (!z.allFinite()) throw Error(ErrorCode::NonFiniteField, name_ + " residual is not finite");
  return z;
}

Matrix InformationOperator::linearize(double t, const Vector& x) const {
  Matrix h = linearize_(t, x);
  if (!h.allFinite()) throw Error(ErrorCode::NonFiniteField, name_ + " linearization is not finite");
  return h;
}

Linearization InformationOperator::evaluate_and_linearize(double t, const Vector& x) const {
  return {evaluate(t, x), linearize(t, x)};
}

Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& y) {
  const Eigen::Index n = y.size();
  Matrix jac;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(y(j)));
    Vector plus = y, minus = y;
    plus(j) += step;
    minus(j) -= step;
    const Vector diff = (fn(plus) - fn(minus)) / (2.0 * step);
    if (j == 0) jac.resize(diff.size(), n);
    jac.col(j) = diff;
  }
  return jac;
}

InformationOperator ode1_operator(int d, int q, Field f, FieldJacobian df_dy, Approximation approx) {
  long jac_cost = 0;
  FieldJacobian jac = jacobian_or_fd(std::move(df_dy), f, true, &jac_cost);
  auto evaluate = [d, f](double, const Vector& x) -> Vector {
    return block(x, d, 1) - f(Vector(), block(x, d, 0));
  };
  InformationOperator::LinearizeFn linearize;
  WorkCost cost{1, 0};
  if (approx == Approximation::EK0) {
    const Matrix h = selector(d, d, q, 1, Matrix::Identity(d, d));
    linearize = [h](double, const Vector&) { return h; };
  } else {
    cost.linearize = resolve_cost(jac_cost, d);
    linearize = [d, q, jac](double, const Vector& x) {
      Matrix h = selector(d, d, q, 1, Matrix::Identity(d, d));
      add_block(h, 0, d, -jac(Vector(), block(x, d, 0)));
      return h;
    };
  }
  return {approx == Approximation::EK0 ? "ode1-ek0" : "ode1-ek1", d, OperatorRole::Ode,
          std::move(evaluate), std::move(linearize), cost};
}

InformationOperator ode2_operator(int d, int q, Field f, FieldJacobian df_dy, FieldJacobian df_ddy,
                                  Approximation approx) {
  require_order(q, 2, "second-order ODE");
  long cost_y = 0, cost_dy = 0;
  FieldJacobian jac_y = jacobian_or_fd(std::move(df_dy), f, true, &cost_y);
  FieldJacobian jac_dy = jacobian_or_fd(std::move(df_ddy), f, false, &cost_dy);
  auto evaluate = [d, f](double, const Vector& x) -> Vector {
    return block(x, d, 2) - f(block(x, d, 1), block(x, d, 0));
  };
  InformationOperator::LinearizeFn linearize;
  WorkCost cost{1, 0};
  if (approx == Approximation::EK0) {
    const Matrix h = selector(d, d, q, 2, Matrix::Identity(d, d));
    linearize = [h](double, const Vector&) { return h; };
  } else {
    // Closed-form df/dy and df/ddy together form one Jacobian evaluation of f.
    cost.linearize = (cost_y > 0 || cost_dy > 0 ? 1 : 0) + (cost_y < 0 ? resolve_cost(cost_y, d) : 0) +
                     (cost_dy < 0 ? resolve_cost(cost_dy, d) : 0);
    linearize = [d, q, jac_y, jac_dy](double, const Vector& x) {
      const Vector y = block(x, d, 0), dy = block(x, d, 1);
      Matrix h = selector(d, d, q, 2, Matrix::Identity(d, d));
      add_block(h, 0, d, -jac_y(dy, y));
      add_block(h, 1, d, -jac_dy(dy, y));
      return h;
    };
  }
  return {approx == Approximation::EK0 ? "ode2-ek0" : "ode2-ek1", d, OperatorRole::Ode,
          std::move(evaluate), std::move(linearize), cost};
}

InformationOperator dae_operator(int d, int q, Matrix mass, Field f, FieldJacobian df_dy) {
  if (mass.rows() != d || mass.cols() != d) {
    throw Error(ErrorCode::InvalidArgument, "mass matrix must be d x d");
  }
  long jac_cost = 0;
  FieldJacobian jac = jacobian_or_fd(std::move(df_dy), f, true, &jac_cost);
  auto evaluate = [d, f, mass](double, const Vector& x) -> Vector {
    return mass * block(x, d, 1) - f(Vector(), block(x, d, 0));
  };
  auto linearize = [d, q, jac, mass](double, const Vector& x) {
    Matrix h = selector(d, d, q, 1, mass);
    add_block(h, 0, d, -jac(Vector(), block(x, d, 0)));
    return h;
  };
  return {"dae", d, OperatorRole::Ode, std::move(evaluate), std::move(linearize),
          WorkCost{1, resolve_cost(jac_cost, d)}};
}

InformationOperator invariant_operator(int d, int q, Invariants inv) {
  const int k = inv.count;
  auto evaluate = [d, g = inv.g](double, const Vector& x) -> Vector {
    return g(block(x, d, 1), block(x, d, 0));
  };
  auto linearize = [d, q, k, gy = inv.dg_dy, gdy = inv.dg_ddy](double, const Vector& x) {
    const Vector y = block(x, d, 0), dy = block(x, d, 1);
    Matrix h = Matrix::Zero(k, static_cast<Eigen::Index>(d) * (q + 1));
    add_block(h, 0, d, gy(dy, y));
    add_block(h, 1, d, gdy(dy, y));
    return h;
  };
  return {"conservation", k, OperatorRole::Auxiliary, std::move(evaluate), std::move(linearize),
          WorkCost{0, 0}};
}

InformationOperator chainrule_operator(int d, int q, Field f, FieldJacobian df_dy,
                                       std::function<Matrix(const Vector&)> jff_jacobian) {
  require_order(q, 2, "chain-rule");
  long jac_cost = 0;
  FieldJacobian jac = jacobian_or_fd(std::move(df_dy), f, true, &jac_cost);
  auto jff = [f, jac](const Vector& y) -> Vector {
    return jac(Vector(), y) * f(Vector(), y);
  };
  long lin_cost = 1;
  if (!jff_jacobian) {
    jff_jacobian = [jff](const Vector& y) { return finite_difference_jacobian(jff, y); };
    lin_cost = 2L * d * (1 + resolve_cost(jac_cost, d));
  }
  auto evaluate = [d, jff](double, const Vector& x) -> Vector {
    return block(x, d, 2) - jff(block(x, d, 0));
  };
  auto linearize = [d, q, jff_jacobian](double, const Vector& x) {
    Matrix h = selector(d, d, q, 2, Matrix::Identity(d, d));
    add_block(h, 0, d, -jff_jacobian(block(x, d, 0)));
    return h;
  };
  return {"chainrule", d, OperatorRole::Auxiliary, std::move(evaluate), std::move(linearize),
          WorkCost{1 + resolve_cost(jac_cost, d), lin_cost}};
}

UpdatePlan::UpdatePlan(OperatorScheme scheme) : kind_(scheme.kind) {
  int ode_count = 0;
  for (const auto& op : scheme.operators) ode_count += op.role() == OperatorRole::Ode;
  if (ode_count == 0) throw Error(ErrorCode::NoOdeOperator, "operator scheme has no ODE operator");
  if (ode_count > 1) throw Error(ErrorCode::MultipleOdeOperators, "operator scheme has several ODE operators");
  for (const auto& op : scheme.operators)
    if (op.role() == OperatorRole::Ode) operators_.push_back(op);
  for (const auto& op : scheme.operators)
    if (op.role() != OperatorRole::Ode) operators_.push_back(op);
}

int UpdatePlan::total_dim() const {
  int m = 0;
  for (const auto& op : operators_) m += op.out_dim();
  return m;
}

UpdateOutcome UpdatePlan::apply(const GaussianSqrt& predicted, double t,
                                const Linearization* ode_at_predicted) const {
  UpdateOutcome out;
  auto linearize = [&](const InformationOperator& op, const Vector& x) {
    out.fevals += op.cost().evaluate + op.cost().linearize;
    return op.evaluate_and_linearize(t, x);
  };

  Linearization ode_lin = ode_at_predicted ? *ode_at_predicted : linearize(ode(), predicted.mean);

  if (kind_ == SchemeKind::Joint) {
    const int m = total_dim();
    Matrix h(m, predicted.dim());
    Vector z(m);
    h.topRows(ode_lin.jacobian.rows()) = ode_lin.jacobian;
    z.head(ode_lin.residual.size()) = ode_lin.residual;
    Eigen::Index row = ode_lin.residual.size();
    for (std::size_t i = 1; i < operators_.size(); ++i) {
      const Linearization lin = linearize(operators_[i], predicted.mean);
      h.middleRows(row, lin.residual.size()) = lin.jacobian;
      z.segment(row, lin.residual.size()) = lin.residual;
      row += lin.residual.size();
    }
    Conditioned c = condition(predicted, h, -z);
    out.state = std::move(c.state);
    out.singular = c.singular;
    return out;
  }

  Conditioned c = condition(predicted, ode_lin.jacobian, -ode_lin.residual);
  out.state = std::move(c.state);
  out.singular = c.singular;
  for (std::size_t i = 1; i < operators_.size(); ++i) {
    const Linearization lin = linearize(operators_[i], out.state.mean);
    Conditioned next = condition(out.state, lin.jacobian, -lin.residual);
    out.state = std::move(next.state);
    out.singular = out.singular || next.singular;
  }
  return out;
}

UpdatePlan compose(OperatorScheme scheme) { return UpdatePlan(std::move(scheme)); }

}  // namespace pnode
