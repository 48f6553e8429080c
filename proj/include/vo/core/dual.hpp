// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>

namespace vo {

// Forward-mode scalar carrying one directional derivative. Seeding the
// inputs' d fields with a direction vector makes every downstream d a
// Jacobian-vector product along that direction.
struct Dual {
  double v = 0;  // value
  double d = 0;  // tangent

  Dual() = default;
  Dual(double value) : v(value), d(0) {}  // NOLINT: implicit from constants
  Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
  Dual operator-() const { return Dual(-v, -d); }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.v != b.v; }

inline double value_of(const Dual& x) { return x.v; }

inline Dual sqrt(const Dual& x) {
  const double s = std::sqrt(x.v);
  return Dual(s, x.d / (2.0 * s));
}
inline Dual abs(const Dual& x) { return x.v < 0 ? -x : x; }
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.v);
  return Dual(e, e * x.d);
}
inline Dual log(const Dual& x) { return Dual(std::log(x.v), x.d / x.v); }
inline Dual sin(const Dual& x) { return Dual(std::sin(x.v), std::cos(x.v) * x.d); }
inline Dual cos(const Dual& x) { return Dual(std::cos(x.v), -std::sin(x.v) * x.d); }
inline Dual floor(const Dual& x) { return Dual(std::floor(x.v), 0.0); }

}  // namespace vo

namespace Eigen {

template <>
struct NumTraits<vo::Dual> : NumTraits<double> {
  typedef vo::Dual Real;
  typedef vo::Dual NonInteger;
  typedef vo::Dual Nested;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 4
  };
};

template <typename BinOp>
struct ScalarBinaryOpTraits<vo::Dual, double, BinOp> {
  typedef vo::Dual ReturnType;
};
template <typename BinOp>
struct ScalarBinaryOpTraits<double, vo::Dual, BinOp> {
  typedef vo::Dual ReturnType;
};

}  // namespace Eigen
