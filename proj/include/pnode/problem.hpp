#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pnode/jet.hpp"
#include "pnode/statespace.hpp"

namespace pnode {

// Autonomous vector fields. First-order fields ignore `dy`; second-order
// fields receive the first derivative as `dy`.
using Field = std::function<Vector(const Vector& dy, const Vector& y)>;
using FieldJacobian = std::function<Matrix(const Vector& dy, const Vector& y)>;
using JetField = std::function<std::vector<Jet>(const std::vector<Jet>& dy, const std::vector<Jet>& y)>;

// Conserved quantities, written as deviations from their value at t0.
struct Invariants {
  int count = 0;
  std::function<Vector(const Vector& dy, const Vector& y)> g;
  FieldJacobian dg_dy;
  FieldJacobian dg_ddy;
};

struct IVProblem {
  std::string name;
  int order = 1;
  int dim = 0;
  std::optional<Matrix> mass;

  Field f;
  FieldJacobian df_dy;   // may be empty: finite differences are used
  FieldJacobian df_ddy;  // order 2 only
  // Jacobian of y -> J_f(y) f(y); order 1 only, optional.
  std::function<Matrix(const Vector& y)> jff_jacobian;
  JetField jet_field;  // empty when the field is outside the jet arithmetic

  std::optional<Invariants> invariants;

  Vector y0;
  Vector dy0;  // order 2 only
  double t0 = 0.0;
  double t1 = 1.0;

  std::function<Vector(double t)> analytic;
  bool stiff = false;
  bool first_order_twin = false;  // generated from an order-2 problem

  bool is_dae() const { return mass.has_value(); }
  // Length of the vector compared against references: y for order 1,
  // (dy, y) for order 2.
  int observable_dim() const { return order == 2 ? 2 * dim : dim; }
};

}  // namespace pnode
