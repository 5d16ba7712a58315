#pragma once

// Square-root Gaussian algebra. Covariances are carried as right factors:
// cov = R^T R with R upper triangular and a non-negative diagonal.

#include <Eigen/Dense>

namespace pnode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct GaussianSqrt {
  Vector mean;
  Matrix rfactor;

  GaussianSqrt() = default;
  GaussianSqrt(Vector m, Matrix r) : mean(std::move(m)), rfactor(std::move(r)) {}

  Eigen::Index dim() const { return mean.size(); }
  Matrix covariance() const { return rfactor.transpose() * rfactor; }
  // Square roots of the covariance diagonal (column norms of the factor).
  Vector marginal_std() const { return rfactor.colwise().norm().transpose(); }
};

// Upper-triangular R (n x n) with R^T R = m^T m, diagonal made non-negative.
Matrix triangularize(const Eigen::Ref<const Matrix>& m);

GaussianSqrt predict(const GaussianSqrt& state, const Matrix& a, const Matrix& q_sqrt);

struct Conditioned {
  GaussianSqrt state;
  Matrix innovation_factor;  // right factor of S = H Sigma H^T
  bool singular = false;     // S was rank deficient; pseudo-inverse used
};

// Noiseless update on the linear(ized) measurement H x. `residual` is the
// observed value minus the predicted measurement.
Conditioned condition(const GaussianSqrt& state, const Matrix& h, const Vector& residual);

struct SmoothedPair {
  GaussianSqrt state;
  Matrix gain;                // G = Sigma_n A^T (Sigma^-_{n+1})^{-1}
  Matrix backward_rfactor;    // right factor of Sigma_n - G Sigma^-_{n+1} G^T
  bool singular = false;
};

// One Rauch-Tung-Striebel step. q_sqrt is the process-noise factor used to
// produce predicted_next from filtered_n.
SmoothedPair smooth_pair(const GaussianSqrt& filtered_n, const GaussianSqrt& predicted_next,
                         const GaussianSqrt& smoothed_next, const Matrix& a,
                         const Matrix& q_sqrt);

// w = R^{-T} b, so that b^T (R^T R)^{-1} b = |w|^2. Falls back to a
// minimum-norm least-squares solve when R is numerically singular.
Vector whiten(const Matrix& rfactor, const Vector& b, bool* singular = nullptr);

// True when some diagonal entry of R is below 1e-14 times the largest one.
bool is_rank_deficient(const Matrix& rfactor);

}  // namespace pnode
