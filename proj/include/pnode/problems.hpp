#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pnode/problem.hpp"

namespace pnode {

// Registered names: pleiades, logistic, lotka_volterra, vanderpol,
// henon_heiles, kepler, robertson, pendulum_dae.
const std::vector<std::string>& problem_names();

IVProblem load_problem(const std::string& name);

// y'' = f(y', y) rewritten as u' = F(u) with u = (y', y).
IVProblem first_order_twin(const IVProblem& problem);

Vector analytic_solution(const IVProblem& problem, double t);

// Rows of f belonging to algebraic equations (zero rows of the mass matrix),
// evaluated at y. Empty for problems without a mass matrix.
Vector algebraic_residual(const IVProblem& problem, const Vector& y);

// Observable vector at t_points: y for order 1, (y', y) for order 2.
// Non-stiff ODEs use an embedded Runge-Kutta 5(4) pair at rtol = atol = tol.
// Stiff problems and DAEs use Radau IIA at kStiffReferenceTol and a tenth of
// it, and fail with ReferenceInconsistent unless the two agree to 1e-7.
inline constexpr double kStiffReferenceTol = 1e-10;

std::vector<Vector> reference_solution(const IVProblem& problem, const std::vector<double>& t_points,
                                       double tol = 1e-12);

// Dormand-Prince 5(4) with step control; the integration lands on every
// requested point (points must be increasing and >= t0).
std::vector<Vector> dopri5(const std::function<Vector(const Vector&)>& f, const Vector& y0, double t0,
                           const std::vector<double>& t_points, double rtol, double atol,
                           long* n_steps = nullptr);

// Three-stage Radau IIA (order 5) for M y' = f(y) with index-1 algebraic
// rows allowed; step-doubling error control.
std::vector<Vector> radau5(const std::function<Vector(const Vector&)>& f,
                           const std::function<Matrix(const Vector&)>& jacobian, const Matrix& mass,
                           const Vector& y0, double t0, const std::vector<double>& t_points, double rtol,
                           double atol, long* n_steps = nullptr);

}  // namespace pnode
