#include "pnode/statespace.hpp"

#include <algorithm>

namespace pnode {

namespace {

constexpr double kSingularRatio = 1e-14;

Matrix pinv(const Matrix& m) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  const double scale = m.cwiseAbs().maxCoeff();
  cod.setThreshold(scale > 0.0 ? kSingularRatio : 0.0);
  return cod.pseudoInverse();
}

}  // namespace

Matrix triangularize(const Eigen::Ref<const Matrix>& m) {
  const Eigen::Index k = m.rows();
  const Eigen::Index n = m.cols();
  Matrix r = Matrix::Zero(n, n);
  if (k == 0) return r;

  Eigen::HouseholderQR<Matrix> qr(m);
  const Eigen::Index rows = std::min(k, n);
  r.topRows(rows) = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (r(i, i) < 0.0) r.row(i) *= -1.0;
  }
  return r;
}

bool is_rank_deficient(const Matrix& rfactor) {
  if (rfactor.rows() == 0) return false;
  const Vector diag = rfactor.diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  if (largest <= 0.0) return true;
  return (diag.array() < kSingularRatio * largest).any();
}

Vector whiten(const Matrix& rfactor, const Vector& b, bool* singular) {
  const bool deficient = is_rank_deficient(rfactor);
  if (singular) *singular = deficient;
  if (!deficient) {
    return rfactor.transpose().triangularView<Eigen::Lower>().solve(b);
  }
  return pinv(rfactor.transpose()) * b;
}

GaussianSqrt predict(const GaussianSqrt& state, const Matrix& a, const Matrix& q_sqrt) {
  const Eigen::Index d = state.dim();
  Matrix stacked(2 * d, d);
  stacked.topRows(d) = state.rfactor * a.transpose();
  stacked.bottomRows(d) = q_sqrt;
  return {a * state.mean, triangularize(stacked)};
}

Conditioned condition(const GaussianSqrt& state, const Matrix& h, const Vector& residual) {
  const Eigen::Index d = state.dim();
  const Eigen::Index m = h.rows();

  Matrix pre(d, m + d);
  pre.leftCols(m) = state.rfactor * h.transpose();
  pre.rightCols(d) = state.rfactor;
  const Matrix post = triangularize(pre);

  Conditioned out;
  out.innovation_factor = post.topLeftCorner(m, m);
  out.singular = is_rank_deficient(out.innovation_factor);

  if (!out.singular) {
    // K r = R12^T R11^{-T} r
    const Matrix r12 = post.topRightCorner(m, d);
    const Vector w =
        out.innovation_factor.transpose().triangularView<Eigen::Lower>().solve(residual);
    out.state.mean = state.mean + r12.transpose() * w;
    out.state.rfactor = post.bottomRightCorner(d, d);
    return out;
  }

  // Rank-deficient innovation: K = Sigma H^T S^+, Joseph form for the factor.
  const Matrix s = out.innovation_factor.transpose() * out.innovation_factor;
  const Matrix hs = pre.leftCols(m).transpose() * state.rfactor;  // H Sigma
  const Matrix gain = hs.transpose() * pinv(s);
  out.state.mean = state.mean + gain * residual;
  const Matrix joseph = Matrix::Identity(d, d) - gain * h;
  out.state.rfactor = triangularize(state.rfactor * joseph.transpose());
  return out;
}

SmoothedPair smooth_pair(const GaussianSqrt& filtered_n, const GaussianSqrt& predicted_next,
                         const GaussianSqrt& smoothed_next, const Matrix& a,
                         const Matrix& q_sqrt) {
  const Eigen::Index d = filtered_n.dim();

  Matrix stacked = Matrix::Zero(2 * d, 2 * d);
  stacked.topLeftCorner(d, d) = filtered_n.rfactor * a.transpose();
  stacked.topRightCorner(d, d) = filtered_n.rfactor;
  stacked.bottomLeftCorner(d, d) = q_sqrt;
  const Matrix tri = triangularize(stacked);
  const Matrix r11 = tri.topLeftCorner(d, d);
  const Matrix r12 = tri.topRightCorner(d, d);

  SmoothedPair out;
  out.singular = is_rank_deficient(r11);
  Matrix gain_t;
  if (!out.singular) {
    gain_t = r11.triangularView<Eigen::Upper>().solve(r12);
    out.backward_rfactor = tri.bottomRightCorner(d, d);
  } else {
    const double trace = r11.squaredNorm();
    if (trace > 0.0) {
      Matrix reg(2 * d, d);
      reg.topRows(d) = r11;
      reg.bottomRows(d) = std::sqrt(1e-14 * trace) * Matrix::Identity(d, d);
      const Matrix r11_reg = triangularize(reg);
      const Matrix cross = r11.transpose() * r12;  // A Sigma_n
      gain_t = r11_reg.transpose().triangularView<Eigen::Lower>().solve(cross);
      gain_t = r11_reg.triangularView<Eigen::Upper>().solve(gain_t);
    } else {
      gain_t = Matrix::Zero(d, d);
    }
    const Matrix gain = gain_t.transpose();
    Matrix joseph(2 * d, d);
    joseph.topRows(d) = filtered_n.rfactor * (Matrix::Identity(d, d) - gain * a).transpose();
    joseph.bottomRows(d) = q_sqrt * gain_t;
    out.backward_rfactor = triangularize(joseph);
  }
  out.gain = gain_t.transpose();

  Matrix smoothed(2 * d, d);
  smoothed.topRows(d) = out.backward_rfactor;
  smoothed.bottomRows(d) = smoothed_next.rfactor * gain_t;
  out.state.mean = filtered_n.mean + out.gain * (smoothed_next.mean - predicted_next.mean);
  out.state.rfactor = triangularize(smoothed);
  return out;
}

}  // namespace pnode
