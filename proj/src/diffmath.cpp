#include "lensforge/diffmath.hpp"

#include <algorithm>
#include <sstream>

namespace lensforge {

namespace {
thread_local GradientTape* g_active_tape = nullptr;

std::string non_finite_message(std::size_t node, OpKind kind) {
  std::ostringstream os;
  os << "non-finite value first produced at tape node " << node << " ("
     << op_name(kind) << ")";
  return os.str();
}
}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSin: return "sin";
    case OpKind::kCos: return "cos";
    case OpKind::kTan: return "tan";
    case OpKind::kAtan: return "atan";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kPow: return "pow";
    case OpKind::kAbs: return "abs";
    case OpKind::kMin: return "min";
    case OpKind::kMax: return "max";
    case OpKind::kConstAdd: return "const-add";
    case OpKind::kConstMul: return "const-mul";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

NonFiniteError::NonFiniteError(std::size_t node, OpKind kind)
    : std::runtime_error(non_finite_message(node, kind)),
      node_(node),
      kind_(kind) {}

GradientTape::GradientTape() { edge_begin_.push_back(0); }

GradientTape* GradientTape::active() { return g_active_tape; }

void GradientTape::clear() {
  values_.clear();
  kinds_.clear();
  edge_begin_.assign(1, 0);
  parents_.clear();
  partials_.clear();
  params_.clear();
}

DiffScalar GradientTape::push(OpKind kind, double value) {
  const auto id = static_cast<std::int32_t>(values_.size());
  values_.push_back(value);
  kinds_.push_back(kind);
  edge_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return DiffScalar(value, id);
}

DiffScalar GradientTape::parameter(double value) {
  DiffScalar leaf = push(OpKind::kLeaf, value);
  params_.push_back(static_cast<std::uint32_t>(leaf.node()));
  return leaf;
}

DiffScalar GradientTape::unary(OpKind kind, const DiffScalar& a, double value,
                               double da) {
  parents_.push_back(static_cast<std::uint32_t>(a.node()));
  partials_.push_back(da);
  return push(kind, value);
}

DiffScalar GradientTape::binary(OpKind kind, const DiffScalar& a,
                                const DiffScalar& b, double value, double da,
                                double db) {
  if (!a.is_constant()) {
    parents_.push_back(static_cast<std::uint32_t>(a.node()));
    partials_.push_back(da);
  }
  if (!b.is_constant()) {
    parents_.push_back(static_cast<std::uint32_t>(b.node()));
    partials_.push_back(db);
  }
  return push(kind, value);
}

DiffScalar GradientTape::record(OpKind kind, std::span<const DiffScalar> inputs,
                                double value, std::span<const double> partials) {
  if (inputs.size() != partials.size()) {
    throw std::invalid_argument("record: one partial derivative per input required");
  }
  bool any = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].is_constant()) continue;
    parents_.push_back(static_cast<std::uint32_t>(inputs[i].node()));
    partials_.push_back(partials[i]);
    any = true;
  }
  if (!any) return DiffScalar(value);
  return push(kind, value);
}

void GradientTape::check_finite(double value, std::size_t node) const {
  if (std::isfinite(value)) return;
  // Report the earliest node that went non-finite; that is where it started.
  for (std::size_t i = 0; i <= node && i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw NonFiniteError(i, kinds_[i]);
  }
  throw NonFiniteError(node, node < kinds_.size() ? kinds_[node] : OpKind::kLeaf);
}

std::vector<double> GradientTape::sweep(std::vector<double> adjoint) const {
  for (std::size_t i = values_.size(); i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    const std::uint32_t end = edge_begin_[i + 1];
    for (std::uint32_t e = edge_begin_[i]; e < end; ++e) {
      adjoint[parents_[e]] += a * partials_[e];
    }
  }
  std::vector<double> grad(params_.size());
  for (std::size_t k = 0; k < params_.size(); ++k) grad[k] = adjoint[params_[k]];
  return grad;
}

std::vector<double> GradientTape::backward(const DiffScalar& loss) const {
  if (loss.is_constant()) {
    if (!std::isfinite(loss.value())) throw NonFiniteError(0, OpKind::kLeaf);
    return std::vector<double>(params_.size(), 0.0);
  }
  const auto node = static_cast<std::size_t>(loss.node());
  check_finite(loss.value(), node);
  std::vector<double> adjoint(node + 1, 0.0);
  adjoint[node] = 1.0;
  // Nodes recorded after the loss cannot influence it.
  adjoint.resize(values_.size(), 0.0);
  return sweep(std::move(adjoint));
}

std::vector<double> GradientTape::backward_seeded(
    std::span<const DiffScalar> outputs, std::span<const double> seeds) const {
  if (outputs.size() != seeds.size()) {
    throw std::invalid_argument("backward_seeded: one seed per output required");
  }
  std::vector<double> adjoint(values_.size(), 0.0);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k].is_constant()) continue;
    const auto node = static_cast<std::size_t>(outputs[k].node());
    check_finite(outputs[k].value(), node);
    adjoint[node] += seeds[k];
  }
  return sweep(std::move(adjoint));
}

TapeScope::TapeScope(GradientTape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

GradientTape& detail::require_tape() {
  if (g_active_tape == nullptr) {
    throw std::logic_error("differentiable arithmetic without an active GradientTape");
  }
  return *g_active_tape;
}

GradientCheck finite_difference_check(const DiffFunction& f,
                                      std::span<const double> at, double step,
                                      double floor) {
  std::vector<double> steps(at.size(), step);
  return finite_difference_check(f, at, steps, floor);
}

GradientCheck finite_difference_check(const DiffFunction& f,
                                      std::span<const double> at,
                                      std::span<const double> steps,
                                      double floor) {
  if (steps.size() != at.size()) {
    throw std::invalid_argument("finite_difference_check: one step per coordinate");
  }
  for (double h : steps) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");
  }
  GradientCheck out;
  {
    GradientTape tape;
    TapeScope scope(tape);
    std::vector<DiffScalar> x;
    x.reserve(at.size());
    for (double v : at) x.push_back(tape.parameter(v));
    const DiffScalar y = f(x);
    if (!std::isfinite(y.value())) {
      throw std::domain_error("finite_difference_check: f is non-finite at the base point");
    }
    out.autodiff = tape.backward(y);
  }
  auto eval = [&](std::vector<double> point) {
    std::vector<DiffScalar> x(point.begin(), point.end());
    const double v = f(x).value();
    if (!std::isfinite(v)) {
      throw std::domain_error("finite_difference_check: f is non-finite at a probe point");
    }
    return v;
  };
  const std::vector<double> base(at.begin(), at.end());
  out.finite_difference.resize(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += steps[i];
    minus[i] -= steps[i];
    const double fd = (eval(plus) - eval(minus)) / (2.0 * steps[i]);
    out.finite_difference[i] = fd;
    const double err = std::abs(out.autodiff[i] - fd) /
                       std::max(std::abs(out.autodiff[i]), floor);
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_coordinate = i;
    }
  }
  return out;
}

}  // namespace lensforge
