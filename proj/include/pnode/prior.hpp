#pragma once

// q-times integrated Wiener process prior. States are derivative-major:
// x = [Y0; Y1; ...; Yq], each block of length d, so A(h) = A1(h) kron I_d.

#include <vector>

#include "pnode/problem.hpp"
#include "pnode/statespace.hpp"

namespace pnode {

struct IWPModel {
  int d = 1;
  int q = 1;
  double diffusion = 1.0;  // scalar sigma^2, Gamma = sigma^2 I_d

  IWPModel(int dim, int order, double sigma2 = 1.0);
  Eigen::Index state_dim() const { return static_cast<Eigen::Index>(d) * (q + 1); }
};

// Selector E_i of derivative block i.
struct Projection {
  int index = 0;

  Matrix matrix(int d, int q) const;
  Vector apply(const Vector& x, int d) const { return x.segment(static_cast<Eigen::Index>(index) * d, d); }
};

struct IWPTransition {
  Matrix a;       // (q+1) x (q+1)
  Matrix q;       // (q+1) x (q+1)
  Matrix q_sqrt;  // right factor, q = q_sqrt^T q_sqrt
};

IWPTransition iwp_transition(int q, double h);

struct Preconditioner {
  Vector t;      // diagonal of the scaling
  Vector t_inv;
  Matrix a_bar;  // binomial(q - i, j - i)
  Matrix q_bar;  // 1 / (2q + 1 - i - j)
  Matrix q_bar_sqrt;
  bool ill_conditioned = false;  // eigen fallback used for q_bar_sqrt
};

Preconditioner preconditioner(int q, double h);

// Right factor of the h-free process noise, memoized per q.
struct QBarFactor {
  Matrix rfactor;
  bool ill_conditioned = false;
};
const QBarFactor& q_bar_factor(int q);

Matrix kron_identity(const Matrix& m, int d);

// Full-state transition in original coordinates with unit diffusion.
struct StateTransition {
  Matrix a;
  Matrix q_sqrt;
};
StateTransition state_transition(const IWPModel& model, double h);

// Prediction carried out in the step-size-free coordinates and mapped back.
GaussianSqrt predict_preconditioned(const GaussianSqrt& state, const IWPModel& model, double h);

// [y(t0), y'(t0), ..., y^(q)(t0)] from jet propagation of the vector field.
// Index-1 DAEs with a diagonal mass matrix are supported; the algebraic
// components of y0 must be consistent.
std::vector<Vector> taylor_coefficients(const IVProblem& problem, int q);

inline constexpr double kInitialVariance = 1e6;

// Exact Taylor initialization when available, else fallback_initial_state.
GaussianSqrt initial_state(const IVProblem& problem, int q);

// y0 exact, Y1 = M^+ f(y0) with variance kappa on the null space of M, every
// other derivative block N(0, kappa I).
GaussianSqrt fallback_initial_state(const IVProblem& problem, int q);

}  // namespace pnode
