#include "pnode/jet.hpp"

#include <algorithm>
#include <cmath>

#include "pnode/error.hpp"

namespace pnode {

namespace {

void truncate_to(std::vector<double>& c, std::size_t n) {
  if (c.size() > n) c.resize(n);
}

}  // namespace

Jet Jet::constant(double value, std::size_t order) {
  std::vector<double> c(order + 1, 0.0);
  c[0] = value;
  return Jet(std::move(c));
}

Jet Jet::variable(double value, std::size_t order) {
  Jet j = constant(value, order);
  if (order >= 1) j.c_[1] = 1.0;
  return j;
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (double& v : r.c_) v = -v;
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  truncate_to(c_, o.size());
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  truncate_to(c_, o.size());
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
  return *this;
}

Jet& Jet::operator*=(const Jet& o) {
  const std::size_t n = std::min(size(), o.size());
  std::vector<double> r(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j <= k; ++j) r[k] += c_[j] * o.c_[k - j];
  }
  c_ = std::move(r);
  return *this;
}

Jet& Jet::operator/=(const Jet& o) {
  const std::size_t n = std::min(size(), o.size());
  if (n == 0) return *this;
  if (o.c_[0] == 0.0) throw Error(ErrorCode::NonFiniteField, "jet division by zero");
  std::vector<double> r(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = c_[k];
    for (std::size_t j = 1; j <= k; ++j) acc -= o.c_[j] * r[k - j];
    r[k] = acc / o.c_[0];
  }
  c_ = std::move(r);
  return *this;
}

Jet operator+(Jet a, double s) {
  if (!a.c_.empty()) a.c_[0] += s;
  return a;
}

Jet operator*(Jet a, double s) {
  for (double& v : a.c_) v *= s;
  return a;
}

Jet operator/(double s, const Jet& a) {
  return Jet::constant(s, a.order()) / a;
}

// a * p' = r * p * a'  gives  k a_0 p_k = sum_{j=1}^{k} (r j - (k - j)) a_j p_{k-j}.
Jet pow(const Jet& a, double exponent) {
  const std::size_t n = a.size();
  if (n == 0) return a;
  if (a[0] == 0.0) throw Error(ErrorCode::NonFiniteField, "jet power at zero base");
  std::vector<double> p(n, 0.0);
  p[0] = std::pow(a[0], exponent);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      acc += (exponent * static_cast<double>(j) - static_cast<double>(k - j)) * a[j] * p[k - j];
    }
    p[k] = acc / (static_cast<double>(k) * a[0]);
  }
  return Jet(std::move(p));
}

// s^2 = a  gives  2 s_0 s_k = a_k - sum_{j=1}^{k-1} s_j s_{k-j}.
Jet sqrt(const Jet& a) {
  const std::size_t n = a.size();
  if (n == 0) return a;
  if (a[0] <= 0.0) throw Error(ErrorCode::NonFiniteField, "jet square root at non-positive base");
  std::vector<double> s(n, 0.0);
  s[0] = std::sqrt(a[0]);
  for (std::size_t k = 1; k < n; ++k) {
    double acc = a[k];
    for (std::size_t j = 1; j < k; ++j) acc -= s[j] * s[k - j];
    s[k] = acc / (2.0 * s[0]);
  }
  return Jet(std::move(s));
}

}  // namespace pnode
