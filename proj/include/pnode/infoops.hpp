#pragma once

// Information operators: residual maps z(t, x) that vanish on the true
// solution, together with their linearizations H(t, x).

#include <functional>
#include <string>
#include <vector>

#include "pnode/problem.hpp"
#include "pnode/statespace.hpp"

namespace pnode {

enum class Approximation { EK0, EK1 };
enum class OperatorRole { Ode, Auxiliary };

// Vector-field evaluations spent by one call of evaluate / linearize.
struct WorkCost {
  long evaluate = 0;
  long linearize = 0;
};

struct Linearization {
  Vector residual;  // z(t, x)
  Matrix jacobian;  // H
};

class InformationOperator {
 public:
  using EvaluateFn = std::function<Vector(double t, const Vector& x)>;
  using LinearizeFn = std::function<Matrix(double t, const Vector& x)>;

  InformationOperator(std::string name, int out_dim, OperatorRole role, EvaluateFn evaluate,
                      LinearizeFn linearize, WorkCost cost);

  const std::string& name() const { return name_; }
  int out_dim() const { return out_dim_; }
  OperatorRole role() const { return role_; }
  const WorkCost& cost() const { return cost_; }

  // Throws Error(NonFiniteField) if the residual is not finite.
  Vector evaluate(double t, const Vector& x) const;
  Matrix linearize(double t, const Vector& x) const;
  Linearization evaluate_and_linearize(double t, const Vector& x) const;

 private:
  std::string name_;
  int out_dim_;
  OperatorRole role_;
  EvaluateFn evaluate_;
  LinearizeFn linearize_;
  WorkCost cost_;
};

// Central differences with step 1e-6 (1 + |y_j|).
Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& fn, const Vector& y);

// z = E1 x - f(E0 x)
InformationOperator ode1_operator(int d, int q, Field f, FieldJacobian df_dy, Approximation approx);

// z = E2 x - f(E1 x, E0 x)
InformationOperator ode2_operator(int d, int q, Field f, FieldJacobian df_dy, FieldJacobian df_ddy,
                                  Approximation approx);

// z = M E1 x - f(E0 x), always linearized exactly.
InformationOperator dae_operator(int d, int q, Matrix mass, Field f, FieldJacobian df_dy);

// z = g(E1 x, E0 x)
InformationOperator invariant_operator(int d, int q, Invariants invariants);

// z = E2 x - J_f(E0 x) f(E0 x)
InformationOperator chainrule_operator(int d, int q, Field f, FieldJacobian df_dy,
                                       std::function<Matrix(const Vector&)> jff_jacobian);

enum class SchemeKind { Joint, Partitioned };

struct OperatorScheme {
  SchemeKind kind = SchemeKind::Joint;
  std::vector<InformationOperator> operators;
};

struct UpdateOutcome {
  GaussianSqrt state;
  bool singular = false;
  long fevals = 0;
};

class UpdatePlan {
 public:
  explicit UpdatePlan(OperatorScheme scheme);

  SchemeKind kind() const { return kind_; }
  const InformationOperator& ode() const { return operators_.front(); }
  const std::vector<InformationOperator>& operators() const { return operators_; }
  int total_dim() const;

  // `ode_at_predicted` is the ODE operator's linearization at the predicted
  // mean when the caller already has it.
  UpdateOutcome apply(const GaussianSqrt& predicted, double t,
                      const Linearization* ode_at_predicted = nullptr) const;

 private:
  SchemeKind kind_;
  std::vector<InformationOperator> operators_;  // ODE operator first
};

UpdatePlan compose(OperatorScheme scheme);

}  // namespace pnode
