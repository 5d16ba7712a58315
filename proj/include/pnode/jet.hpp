#pragma once

// Truncated power series sum_k c_k t^k. Arithmetic is closed under the
// operations used by the bundled vector fields; the truncation order of a
// binary result is the smaller of the two operands.

#include <cstddef>
#include <vector>

namespace pnode {

class Jet {
 public:
  Jet() = default;
  explicit Jet(std::vector<double> coefficients) : c_(std::move(coefficients)) {}
  static Jet constant(double value, std::size_t order);
  static Jet variable(double value, std::size_t order);  // value + t

  std::size_t order() const { return c_.empty() ? 0 : c_.size() - 1; }
  std::size_t size() const { return c_.size(); }
  double operator[](std::size_t k) const { return c_[k]; }
  double& operator[](std::size_t k) { return c_[k]; }
  const std::vector<double>& coefficients() const { return c_; }

  Jet operator-() const;
  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, const Jet& b) { return a *= b; }
  friend Jet operator/(Jet a, const Jet& b) { return a /= b; }

  friend Jet operator+(Jet a, double s);
  friend Jet operator+(double s, Jet a) { return std::move(a) + s; }
  friend Jet operator-(Jet a, double s) { return std::move(a) + (-s); }
  friend Jet operator-(double s, const Jet& a) { return (-a) + s; }
  friend Jet operator*(Jet a, double s);
  friend Jet operator*(double s, Jet a) { return std::move(a) * s; }
  friend Jet operator/(Jet a, double s) { return std::move(a) * (1.0 / s); }
  friend Jet operator/(double s, const Jet& a);

 private:
  std::vector<double> c_;
};

Jet pow(const Jet& a, double exponent);
Jet sqrt(const Jet& a);

}  // namespace pnode
