// Reverse-mode automatic differentiation over scalars.
//
// A DiffScalar is a value plus an optional handle into the thread's active
// GradientTape. Arithmetic on handles appends nodes to that tape; arithmetic on
// constants is folded and never recorded. One tape is meant to live for a single
// loss evaluation: register the parameters, evaluate, call backward(), clear.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lensforge {

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kSqrt,
  kSin,
  kCos,
  kTan,
  kAtan,
  kExp,
  kLog,
  kPow,
  kAbs,
  kMin,
  kMax,
  kConstAdd,
  kConstMul,
  kCustom,
};

const char* op_name(OpKind kind);

/// Thrown by GradientTape::backward when the loss is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t node, OpKind kind);
  std::size_t node() const { return node_; }
  OpKind kind() const { return kind_; }

 private:
  std::size_t node_;
  OpKind kind_;
};

class GradientTape;

class DiffScalar {
 public:
  DiffScalar() = default;
  DiffScalar(double value) : value_(value) {}  // NOLINT: constants convert implicitly

  double value() const { return value_; }
  std::int32_t node() const { return node_; }
  bool is_constant() const { return node_ < 0; }

 private:
  friend class GradientTape;
  DiffScalar(double value, std::int32_t node) : value_(value), node_(node) {}

  double value_ = 0.0;
  std::int32_t node_ = -1;
};

class GradientTape {
 public:
  GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  /// Registers an optimizable leaf. Leaves are reported by backward() in
  /// registration order.
  DiffScalar parameter(double value);

  /// Appends a node with one partial derivative per input. Constant inputs are
  /// dropped; if every input is constant the result is a constant.
  DiffScalar record(OpKind kind, std::span<const DiffScalar> inputs,
                    double value, std::span<const double> partials);

  DiffScalar unary(OpKind kind, const DiffScalar& a, double value, double da);
  DiffScalar binary(OpKind kind, const DiffScalar& a, const DiffScalar& b,
                    double value, double da, double db);

  /// Gradient of `loss` with respect to every registered parameter.
  std::vector<double> backward(const DiffScalar& loss) const;

  /// Vector-Jacobian product: sum_k seeds[k] * d outputs[k] / d parameters.
  std::vector<double> backward_seeded(std::span<const DiffScalar> outputs,
                                      std::span<const double> seeds) const;

  std::size_t size() const { return values_.size(); }
  std::size_t edge_count() const { return parents_.size(); }
  std::size_t parameter_count() const { return params_.size(); }
  double node_value(std::size_t node) const { return values_[node]; }
  OpKind node_kind(std::size_t node) const { return kinds_[node]; }

  void clear();

  /// Tape that arithmetic on this thread records onto, or nullptr.
  static GradientTape* active();

 private:
  friend class TapeScope;
  std::vector<double> sweep(std::vector<double> adjoint) const;
  void check_finite(double value, std::size_t node) const;
  DiffScalar push(OpKind kind, double value);

  std::vector<double> values_;
  std::vector<OpKind> kinds_;
  std::vector<std::uint32_t> edge_begin_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<std::uint32_t> params_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(GradientTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradientTape* previous_;
};

namespace detail {
GradientTape& require_tape();

inline DiffScalar unary(OpKind kind, const DiffScalar& a, double v, double da) {
  if (a.is_constant()) return DiffScalar(v);
  return require_tape().unary(kind, a, v, da);
}

inline DiffScalar binary(OpKind kind, const DiffScalar& a, const DiffScalar& b,
                         double v, double da, double db) {
  if (a.is_constant() && b.is_constant()) return DiffScalar(v);
  return require_tape().binary(kind, a, b, v, da, db);
}
}  // namespace detail

inline double value(double x) { return x; }
inline double value(const DiffScalar& x) { return x.value(); }

/// True for a literal zero that cannot carry gradient.
inline bool is_structural_zero(double x) { return x == 0.0; }
inline bool is_structural_zero(const DiffScalar& x) {
  return x.is_constant() && x.value() == 0.0;
}

inline DiffScalar operator+(const DiffScalar& a, const DiffScalar& b) {
  if (b.is_constant() && b.value() == 0.0) return a;
  if (a.is_constant() && a.value() == 0.0) return b;
  return detail::binary(OpKind::kAdd, a, b, a.value() + b.value(), 1.0, 1.0);
}
inline DiffScalar operator-(const DiffScalar& a, const DiffScalar& b) {
  if (b.is_constant() && b.value() == 0.0) return a;
  return detail::binary(OpKind::kSub, a, b, a.value() - b.value(), 1.0, -1.0);
}
inline DiffScalar operator*(const DiffScalar& a, const DiffScalar& b) {
  if (b.is_constant() && b.value() == 1.0) return a;
  if (a.is_constant() && a.value() == 1.0) return b;
  return detail::binary(OpKind::kMul, a, b, a.value() * b.value(), b.value(),
                        a.value());
}
inline DiffScalar operator/(const DiffScalar& a, const DiffScalar& b) {
  const double inv = 1.0 / b.value();
  const double q = a.value() * inv;
  return detail::binary(OpKind::kDiv, a, b, q, inv, -q * inv);
}
inline DiffScalar operator-(const DiffScalar& a) {
  return detail::unary(OpKind::kNeg, a, -a.value(), -1.0);
}
inline DiffScalar operator+(const DiffScalar& a) { return a; }

inline DiffScalar operator+(const DiffScalar& a, double b) {
  if (b == 0.0) return a;
  return detail::unary(OpKind::kConstAdd, a, a.value() + b, 1.0);
}
inline DiffScalar operator+(double a, const DiffScalar& b) { return b + a; }
inline DiffScalar operator-(const DiffScalar& a, double b) {
  if (b == 0.0) return a;
  return detail::unary(OpKind::kConstAdd, a, a.value() - b, 1.0);
}
inline DiffScalar operator-(double a, const DiffScalar& b) {
  return detail::unary(OpKind::kConstAdd, b, a - b.value(), -1.0);
}
inline DiffScalar operator*(const DiffScalar& a, double b) {
  if (b == 1.0) return a;
  return detail::unary(OpKind::kConstMul, a, a.value() * b, b);
}
inline DiffScalar operator*(double a, const DiffScalar& b) { return b * a; }
inline DiffScalar operator/(const DiffScalar& a, double b) {
  return detail::unary(OpKind::kConstMul, a, a.value() / b, 1.0 / b);
}
inline DiffScalar operator/(double a, const DiffScalar& b) {
  const double q = a / b.value();
  return detail::unary(OpKind::kDiv, b, q, -q / b.value());
}

inline DiffScalar& operator+=(DiffScalar& a, const DiffScalar& b) { return a = a + b; }
inline DiffScalar& operator-=(DiffScalar& a, const DiffScalar& b) { return a = a - b; }
inline DiffScalar& operator*=(DiffScalar& a, const DiffScalar& b) { return a = a * b; }
inline DiffScalar& operator/=(DiffScalar& a, const DiffScalar& b) { return a = a / b; }

// Comparisons look at values only.
inline bool operator<(const DiffScalar& a, const DiffScalar& b) { return a.value() < b.value(); }
inline bool operator>(const DiffScalar& a, const DiffScalar& b) { return a.value() > b.value(); }
inline bool operator<=(const DiffScalar& a, const DiffScalar& b) { return a.value() <= b.value(); }
inline bool operator>=(const DiffScalar& a, const DiffScalar& b) { return a.value() >= b.value(); }
inline bool operator==(const DiffScalar& a, const DiffScalar& b) { return a.value() == b.value(); }
inline bool operator!=(const DiffScalar& a, const DiffScalar& b) { return a.value() != b.value(); }

// Plain-double overloads so generic code can call these unqualified inside
// this namespace.
inline double sqrt(double x) { return std::sqrt(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double atan(double x) { return std::atan(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double pow(double x, double p) { return std::pow(x, p); }
inline double abs(double x) { return std::abs(x); }

inline DiffScalar sqrt(const DiffScalar& a) {
  const double s = std::sqrt(a.value());
  return detail::unary(OpKind::kSqrt, a, s, 0.5 / s);
}
inline DiffScalar sin(const DiffScalar& a) {
  return detail::unary(OpKind::kSin, a, std::sin(a.value()), std::cos(a.value()));
}
inline DiffScalar cos(const DiffScalar& a) {
  return detail::unary(OpKind::kCos, a, std::cos(a.value()), -std::sin(a.value()));
}
inline DiffScalar tan(const DiffScalar& a) {
  const double t = std::tan(a.value());
  return detail::unary(OpKind::kTan, a, t, 1.0 + t * t);
}
inline DiffScalar atan(const DiffScalar& a) {
  return detail::unary(OpKind::kAtan, a, std::atan(a.value()),
                       1.0 / (1.0 + a.value() * a.value()));
}
inline DiffScalar exp(const DiffScalar& a) {
  const double e = std::exp(a.value());
  return detail::unary(OpKind::kExp, a, e, e);
}
inline DiffScalar log(const DiffScalar& a) {
  return detail::unary(OpKind::kLog, a, std::log(a.value()), 1.0 / a.value());
}
inline DiffScalar pow(const DiffScalar& a, double p) {
  const double v = std::pow(a.value(), p);
  return detail::unary(OpKind::kPow, a, v, p * std::pow(a.value(), p - 1.0));
}
inline DiffScalar abs(const DiffScalar& a) {
  return detail::unary(OpKind::kAbs, a, std::abs(a.value()),
                       a.value() < 0.0 ? -1.0 : 1.0);
}
inline DiffScalar square(const DiffScalar& a) { return a * a; }
inline double square(double a) { return a * a; }

// Clamps against a constant. At a tie the bound wins: a regularizer sitting
// exactly on its threshold gets no gradient.
inline DiffScalar fmin(const DiffScalar& u, double bound) {
  return u.value() < bound ? u : DiffScalar(bound);
}
inline DiffScalar fmax(const DiffScalar& u, double bound) {
  return u.value() > bound ? u : DiffScalar(bound);
}
inline double fmin(double u, double bound) { return u < bound ? u : bound; }
inline double fmax(double u, double bound) { return u > bound ? u : bound; }
inline DiffScalar fmin(const DiffScalar& a, const DiffScalar& b) {
  return a.value() <= b.value() ? a : b;
}
inline DiffScalar fmax(const DiffScalar& a, const DiffScalar& b) {
  return a.value() >= b.value() ? a : b;
}

inline bool isfinite(const DiffScalar& a) { return std::isfinite(a.value()); }

/// Result of comparing reverse-mode gradients against central differences.
struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::vector<double> autodiff;
  std::vector<double> finite_difference;
};

using DiffFunction = std::function<DiffScalar(std::span<const DiffScalar>)>;

/// max_i |g_i - fd_i| / max(|g_i|, floor) with central differences of the
/// given step. Throws std::domain_error if f is non-finite anywhere it is
/// evaluated.
GradientCheck finite_difference_check(const DiffFunction& f,
                                      std::span<const double> at, double step,
                                      double floor = 1e-8);

/// Same, with one step per coordinate.
GradientCheck finite_difference_check(const DiffFunction& f,
                                      std::span<const double> at,
                                      std::span<const double> steps,
                                      double floor = 1e-8);

}  // namespace lensforge

namespace Eigen {

template <>
struct NumTraits<lensforge::DiffScalar> : NumTraits<double> {
  using Real = lensforge::DiffScalar;
  using NonInteger = lensforge::DiffScalar;
  using Nested = lensforge::DiffScalar;
  using Literal = lensforge::DiffScalar;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 4,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<lensforge::DiffScalar, double, BinaryOp> {
  using ReturnType = lensforge::DiffScalar;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, lensforge::DiffScalar, BinaryOp> {
  using ReturnType = lensforge::DiffScalar;
};

}  // namespace Eigen
