#include "lfads/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfads/errors.hpp"
#include "lfads/kernels.hpp"

namespace lfads {

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

void TensorNode::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

namespace {

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  return n;
}

thread_local Tape* t_current_tape = nullptr;

}  // namespace

Tensor make_tensor(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return make_tensor(std::move(shape), std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  size_t n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  size_t n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return make_tensor({}, {v}); }

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
  Tensor t = make_tensor(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

std::vector<double>& Tensor::grad_mut() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item: tensor has shape " + shape_str(shape()) + ", expected a single element");
  return node_->values[0];
}

double Tensor::at(std::initializer_list<size_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw ShapeError("at: " + std::to_string(idx.size()) + " indices for shape " + shape_str(s));
  size_t flat = 0;
  size_t d = 0;
  for (size_t i : idx) {
    if (i >= s[d])
      throw ShapeError("at: index " + std::to_string(i) + " out of range for axis " +
                       std::to_string(d) + " of shape " + shape_str(s));
    flat = flat * s[d] + i;
    ++d;
  }
  return node_->values[flat];
}

// ----- tape -----------------------------------------------------------------

Tape* Tape::current() { return t_current_tape; }

void Tape::record(std::shared_ptr<TensorNode> out, std::function<void()> fn) {
  entries_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  // Intermediates get fresh gradients every call; leaves accumulate.
  for (auto& e : entries_) e.out->grad.assign(e.out->values.size(), 0.0);
  auto ln = loss.node();
  ln->ensure_grad();
  ln->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
}

TapeScope::TapeScope(Tape& tape) : prev_(t_current_tape) { t_current_tape = &tape; }
TapeScope::~TapeScope() { t_current_tape = prev_; }

namespace {

// The tape records an op iff a tape is installed and some input needs grad.
bool tape_active(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::current()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void mark_output(Tensor& out) {
  out.set_requires_grad(true);
  out.node()->is_leaf = false;
}

void check_positive_domain(const char* op, const std::vector<double>& v) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0))
      throw ValueError(std::string(op) + ": input[" + std::to_string(i) + "] = " +
                       std::to_string(v[i]) + " is not > 0");
  }
}

Tensor unary_op(const Tensor& x, kernels::Unary kind, const char* name, bool positive_domain) {
  if (positive_domain) check_positive_domain(name, x.values());
  std::vector<double> out_v(x.numel());
  kernels::unary_apply(kind, x.values().data(), out_v.data(), x.numel());
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, kind] {
      xn->ensure_grad();
      kernels::unary_grad_acc(kind, xn->values.data(), on->values.data(), on->grad.data(),
                              xn->grad.data(), xn->values.size());
    });
  }
  return out;
}

enum class BinKind { add, sub, mul, div };

kernels::Binary to_kernel(BinKind k) {
  switch (k) {
    case BinKind::add: return kernels::Binary::add;
    case BinKind::sub: return kernels::Binary::sub;
    case BinKind::mul: return kernels::Binary::mul;
    case BinKind::div: return kernels::Binary::div;
  }
  return kernels::Binary::add;
}

const char* bin_name(BinKind k) {
  switch (k) {
    case BinKind::add: return "add";
    case BinKind::sub: return "sub";
    case BinKind::mul: return "mul";
    case BinKind::div: return "div";
  }
  return "?";
}

// Equal-shape elementwise path.
Tensor binary_same(const Tensor& a, const Tensor& b, BinKind k) {
  const size_t n = a.numel();
  std::vector<double> out_v(n);
  kernels::binary_apply(to_kernel(k), a.values().data(), b.values().data(), out_v.data(), n);
  Tensor out = Tensor::from(a.shape(), std::move(out_v));
  if (tape_active({&a, &b})) {
    mark_output(out);
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    Tape::current()->record(on, [an, bn, on, k] {
      const size_t n = on->values.size();
      const double* gy = on->grad.data();
      switch (k) {
        case BinKind::add:
          if (an->requires_grad) { an->ensure_grad(); kernels::axpy_acc(1.0, gy, an->grad.data(), n); }
          if (bn->requires_grad) { bn->ensure_grad(); kernels::axpy_acc(1.0, gy, bn->grad.data(), n); }
          break;
        case BinKind::sub:
          if (an->requires_grad) { an->ensure_grad(); kernels::axpy_acc(1.0, gy, an->grad.data(), n); }
          if (bn->requires_grad) { bn->ensure_grad(); kernels::axpy_acc(-1.0, gy, bn->grad.data(), n); }
          break;
        case BinKind::mul:
          if (an->requires_grad) { an->ensure_grad(); kernels::mul_acc(gy, bn->values.data(), an->grad.data(), n); }
          if (bn->requires_grad) { bn->ensure_grad(); kernels::mul_acc(gy, an->values.data(), bn->grad.data(), n); }
          break;
        case BinKind::div:
          if (an->requires_grad) { an->ensure_grad(); kernels::div_acc(gy, bn->values.data(), an->grad.data(), n); }
          if (bn->requires_grad) {
            bn->ensure_grad();
            kernels::div_grad_den_acc(gy, an->values.data(), bn->values.data(), bn->grad.data(), n);
          }
          break;
      }
    });
  }
  return out;
}

// x (tensor) op s where s is a broadcast single-element tensor.
Tensor binary_tensor_scalar(const Tensor& x, const Tensor& s, BinKind k) {
  const double sv = s.values()[0];
  const size_t n = x.numel();
  std::vector<double> out_v(n);
  kernels::ScalarOp sop;
  switch (k) {
    case BinKind::add: sop = kernels::ScalarOp::add; break;
    case BinKind::sub: sop = kernels::ScalarOp::sub; break;
    case BinKind::mul: sop = kernels::ScalarOp::mul; break;
    case BinKind::div: sop = kernels::ScalarOp::div; break;
  }
  kernels::scalar_apply(sop, x.values().data(), sv, out_v.data(), n);
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&x, &s})) {
    mark_output(out);
    auto xn = x.node();
    auto sn = s.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, sn, on, k, sv] {
      const size_t n = on->values.size();
      const double* gy = on->grad.data();
      if (xn->requires_grad) {
        xn->ensure_grad();
        switch (k) {
          case BinKind::add:
          case BinKind::sub: kernels::axpy_acc(1.0, gy, xn->grad.data(), n); break;
          case BinKind::mul: kernels::axpy_acc(sv, gy, xn->grad.data(), n); break;
          case BinKind::div: kernels::axpy_acc(1.0 / sv, gy, xn->grad.data(), n); break;
        }
      }
      if (sn->requires_grad) {
        sn->ensure_grad();
        switch (k) {
          case BinKind::add: sn->grad[0] += kernels::reduce_all_sum(gy, n); break;
          case BinKind::sub: sn->grad[0] -= kernels::reduce_all_sum(gy, n); break;
          case BinKind::mul: sn->grad[0] += kernels::reduce_dot(gy, xn->values.data(), n); break;
          case BinKind::div:
            sn->grad[0] -= kernels::reduce_dot(gy, xn->values.data(), n) / (sv * sv);
            break;
        }
      }
    });
  }
  return out;
}

// s (broadcast single element) op x.
Tensor binary_scalar_tensor(const Tensor& s, const Tensor& x, BinKind k) {
  const double sv = s.values()[0];
  const size_t n = x.numel();
  std::vector<double> out_v(n);
  kernels::ScalarOp sop;
  switch (k) {
    case BinKind::add: sop = kernels::ScalarOp::add; break;
    case BinKind::sub: sop = kernels::ScalarOp::rsub; break;
    case BinKind::mul: sop = kernels::ScalarOp::mul; break;
    case BinKind::div: sop = kernels::ScalarOp::rdiv; break;
  }
  kernels::scalar_apply(sop, x.values().data(), sv, out_v.data(), n);
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&s, &x})) {
    mark_output(out);
    auto xn = x.node();
    auto sn = s.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, sn, on, k, sv] {
      const size_t n = on->values.size();
      const double* gy = on->grad.data();
      if (xn->requires_grad) {
        xn->ensure_grad();
        switch (k) {
          case BinKind::add: kernels::axpy_acc(1.0, gy, xn->grad.data(), n); break;
          case BinKind::sub: kernels::axpy_acc(-1.0, gy, xn->grad.data(), n); break;
          case BinKind::mul: kernels::axpy_acc(sv, gy, xn->grad.data(), n); break;
          case BinKind::div:
            kernels::rdiv_grad_acc(gy, xn->values.data(), sv, xn->grad.data(), n);
            break;
        }
      }
      if (sn->requires_grad) {
        sn->ensure_grad();
        switch (k) {
          case BinKind::add:
          case BinKind::sub: sn->grad[0] += kernels::reduce_all_sum(gy, n); break;
          case BinKind::mul: sn->grad[0] += kernels::reduce_dot(gy, xn->values.data(), n); break;
          case BinKind::div: {
            std::vector<double> tmp(n);
            kernels::binary_apply(kernels::Binary::div, gy, xn->values.data(), tmp.data(), n);
            sn->grad[0] += kernels::reduce_all_sum(tmp.data(), n);
            break;
          }
        }
      }
    });
  }
  return out;
}

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind k) {
  if (a.shape() == b.shape()) return binary_same(a, b, k);
  if (b.numel() == 1) return binary_tensor_scalar(a, b, k);
  if (a.numel() == 1) return binary_scalar_tensor(a, b, k);
  throw ShapeError(std::string(bin_name(k)) + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()) + " are not broadcastable (equal shapes or a single-element operand)");
}

void check_div_values(const Tensor& b) {
  // Division by exact zero is a caller error, not NaN fodder.
  for (size_t i = 0; i < b.numel(); ++i)
    if (b.values()[i] == 0.0)
      throw ValueError("div: denominator[" + std::to_string(i) + "] is zero");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::mul); }
Tensor divide(const Tensor& a, const Tensor& b) {
  check_div_values(b);
  return binary_op(a, b, BinKind::div);
}

namespace {

Tensor scalar_op(const Tensor& x, double s, kernels::ScalarOp sop, double dx_factor,
                 bool rdiv = false) {
  const size_t n = x.numel();
  std::vector<double> out_v(n);
  kernels::scalar_apply(sop, x.values().data(), s, out_v.data(), n);
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, dx_factor, rdiv, s] {
      xn->ensure_grad();
      const size_t n = on->values.size();
      if (rdiv) {
        kernels::rdiv_grad_acc(on->grad.data(), xn->values.data(), s, xn->grad.data(), n);
      } else {
        kernels::axpy_acc(dx_factor, on->grad.data(), xn->grad.data(), n);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add_scalar(const Tensor& x, double s) { return scalar_op(x, s, kernels::ScalarOp::add, 1.0); }
Tensor sub_scalar(const Tensor& x, double s) { return scalar_op(x, s, kernels::ScalarOp::sub, 1.0); }
Tensor rsub_scalar(double s, const Tensor& x) { return scalar_op(x, s, kernels::ScalarOp::rsub, -1.0); }
Tensor mul_scalar(const Tensor& x, double s) { return scalar_op(x, s, kernels::ScalarOp::mul, s); }
Tensor div_scalar(const Tensor& x, double s) {
  if (s == 0.0) throw ValueError("div_scalar: division by zero");
  return scalar_op(x, s, kernels::ScalarOp::div, 1.0 / s);
}
Tensor rdiv_scalar(double s, const Tensor& x) {
  for (size_t i = 0; i < x.numel(); ++i)
    if (x.values()[i] == 0.0) throw ValueError("rdiv_scalar: denominator[" + std::to_string(i) + "] is zero");
  return scalar_op(x, s, kernels::ScalarOp::rdiv, 0.0, /*rdiv=*/true);
}

Tensor neg(const Tensor& x) { return unary_op(x, kernels::Unary::neg, "neg", false); }
Tensor exp(const Tensor& x) { return unary_op(x, kernels::Unary::exp, "exp", false); }
Tensor log(const Tensor& x) { return unary_op(x, kernels::Unary::log, "log", true); }
Tensor tanh(const Tensor& x) { return unary_op(x, kernels::Unary::tanh, "tanh", false); }
Tensor sigmoid(const Tensor& x) { return unary_op(x, kernels::Unary::sigmoid, "sigmoid", false); }
Tensor softplus(const Tensor& x) { return unary_op(x, kernels::Unary::softplus, "softplus", false); }
Tensor lgamma(const Tensor& x) { return unary_op(x, kernels::Unary::lgamma, "lgamma", true); }
Tensor digamma(const Tensor& x) { return unary_op(x, kernels::Unary::digamma, "digamma", true); }

Tensor pow_scalar(const Tensor& x, double p) {
  const size_t n = x.numel();
  // Non-integer powers of negative numbers are NaN; reject them up front.
  if (p != std::floor(p)) check_positive_domain("pow_scalar", x.values());
  std::vector<double> out_v(n);
  kernels::scalar_apply(kernels::ScalarOp::pow, x.values().data(), p, out_v.data(), n);
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, p] {
      xn->ensure_grad();
      kernels::pow_grad_acc(xn->values.data(), p, on->grad.data(), xn->grad.data(),
                            xn->values.size());
    });
  }
  return out;
}

Tensor square(const Tensor& x) { return mul(x, x); }

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi))
    throw ValueError("clamp: lo " + std::to_string(lo) + " > hi " + std::to_string(hi));
  const size_t n = x.numel();
  std::vector<double> out_v(n);
  kernels::clamp_apply(x.values().data(), lo, hi, out_v.data(), n);
  Tensor out = Tensor::from(x.shape(), std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, lo, hi] {
      xn->ensure_grad();
      kernels::clamp_grad_acc(xn->values.data(), lo, hi, on->grad.data(), xn->grad.data(),
                              xn->values.size());
    });
  }
  return out;
}

// ----- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul: expects 2-d operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const size_t m = a.shape()[0], k = a.shape()[1];
  const size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  std::vector<double> out_v(m * n);
  kernels::matmul_nn(a.values().data(), b.values().data(), out_v.data(), m, k, n);
  Tensor out = Tensor::from({m, n}, std::move(out_v));
  if (tape_active({&a, &b})) {
    mark_output(out);
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    Tape::current()->record(on, [an, bn, on, m, k, n] {
      if (an->requires_grad) {
        an->ensure_grad();
        kernels::matmul_nt_acc(on->grad.data(), bn->values.data(), an->grad.data(), m, n, k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        kernels::matmul_tn_acc(an->values.data(), on->grad.data(), bn->grad.data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.ndim() != 2)
    throw ShapeError("transpose: expects a 2-d tensor, got " + shape_str(x.shape()));
  const size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out_v(m * n);
  const auto& xv = x.values();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out_v[j * m + i] = xv[i * n + j];
  Tensor out = Tensor::from({n, m}, std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, m, n] {
      xn->ensure_grad();
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) xn->grad[i * n + j] += on->grad[j * m + i];
    });
  }
  return out;
}

// ----- reductions -----------------------------------------------------------

namespace {

Shape drop_axes(const Shape& s, const std::vector<size_t>& axes_desc) {
  Shape out = s;
  for (size_t ax : axes_desc) out.erase(out.begin() + static_cast<long>(ax));
  return out;
}

// Maps each input flat index to the flat index of the surviving axes.
// Used by the reduction backward to broadcast the output gradient.
void broadcast_grad(const Shape& in_shape, const std::vector<bool>& reduced,
                    const std::vector<double>& gy, std::vector<double>& gx, double scale) {
  const size_t nd = in_shape.size();
  std::vector<size_t> in_stride(nd, 1), out_stride(nd, 0);
  size_t acc = 1;
  for (size_t d = nd; d-- > 0;) {
    in_stride[d] = acc;
    acc *= in_shape[d];
  }
  size_t oacc = 1;
  for (size_t d = nd; d-- > 0;) {
    if (!reduced[d]) {
      out_stride[d] = oacc;
      oacc *= in_shape[d];
    }
  }
  const size_t n = acc;
  for (size_t i = 0; i < n; ++i) {
    size_t rem = i, oidx = 0;
    for (size_t d = 0; d < nd; ++d) {
      const size_t c = rem / in_stride[d];
      rem -= c * in_stride[d];
      oidx += c * out_stride[d];
    }
    gx[i] += scale * gy[oidx];
  }
}

Tensor reduce_impl(const Tensor& x, std::vector<size_t> axes, bool mean) {
  const Shape& s = x.shape();
  for (size_t ax : axes)
    if (ax >= s.size())
      throw ShapeError("reduce: axis " + std::to_string(ax) + " out of range for shape " + shape_str(s));
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());

  const bool reduce_all = axes.empty() || axes.size() == s.size();
  size_t count = 1;
  if (reduce_all) {
    count = x.numel();
  } else {
    for (size_t ax : axes) count *= s[ax];
  }
  if (count == 0 || x.numel() == 0)
    throw ShapeError("reduce: cannot reduce over an empty tensor of shape " + shape_str(s));

  Tensor out;
  if (reduce_all) {
    double total = kernels::reduce_all_sum(x.values().data(), x.numel());
    if (mean) total /= static_cast<double>(count);
    out = Tensor::scalar(total);
  } else {
    // Apply single-axis reductions from the highest axis down so earlier
    // axis numbers stay valid.
    std::vector<size_t> axes_desc(axes.rbegin(), axes.rend());
    std::vector<double> cur = x.values();
    Shape cur_shape = s;
    for (size_t ax : axes_desc) {
      size_t outer = 1, inner = 1;
      for (size_t d = 0; d < ax; ++d) outer *= cur_shape[d];
      for (size_t d = ax + 1; d < cur_shape.size(); ++d) inner *= cur_shape[d];
      std::vector<double> next(outer * inner);
      kernels::reduce_axis_sum(cur.data(), next.data(), outer, cur_shape[ax], inner);
      cur = std::move(next);
      cur_shape.erase(cur_shape.begin() + static_cast<long>(ax));
    }
    if (mean) {
      std::vector<double> scaled(cur.size());
      kernels::scalar_apply(kernels::ScalarOp::div, cur.data(), static_cast<double>(count),
                            scaled.data(), cur.size());
      cur = std::move(scaled);
    }
    out = Tensor::from(cur_shape, std::move(cur));
  }

  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    const double scale = mean ? 1.0 / static_cast<double>(count) : 1.0;
    if (reduce_all) {
      Tape::current()->record(on, [xn, on, scale] {
        xn->ensure_grad();
        const double g = on->grad[0] * scale;
        for (auto& v : xn->grad) v += g;
      });
    } else {
      std::vector<bool> reduced(s.size(), false);
      for (size_t ax : axes) reduced[ax] = true;
      Shape in_shape = s;
      Tape::current()->record(on, [xn, on, scale, reduced, in_shape] {
        xn->ensure_grad();
        broadcast_grad(in_shape, reduced, on->grad, xn->grad, scale);
      });
    }
  }
  return out;
}

}  // namespace

Tensor reduce_sum(const Tensor& x, std::vector<size_t> axes) {
  return reduce_impl(x, std::move(axes), false);
}

Tensor reduce_mean(const Tensor& x, std::vector<size_t> axes) {
  return reduce_impl(x, std::move(axes), true);
}

// ----- structure ops --------------------------------------------------------

Tensor expand0(const Tensor& v, size_t m) {
  if (v.ndim() != 1)
    throw ShapeError("expand0: expects a 1-d tensor, got " + shape_str(v.shape()));
  const size_t n = v.numel();
  std::vector<double> out_v(m * n);
  for (size_t i = 0; i < m; ++i)
    std::copy(v.values().begin(), v.values().end(), out_v.begin() + static_cast<long>(i * n));
  Tensor out = Tensor::from({m, n}, std::move(out_v));
  if (tape_active({&v})) {
    mark_output(out);
    auto vn = v.node();
    auto on = out.node();
    Tape::current()->record(on, [vn, on, m, n] {
      vn->ensure_grad();
      kernels::col_sum_acc(on->grad.data(), vn->grad.data(), m, n);
    });
  }
  return out;
}

Tensor expand_last(const Tensor& v, const Shape& target_shape) {
  if (v.ndim() != 1)
    throw ShapeError("expand_last: expects a 1-d tensor, got " + shape_str(v.shape()));
  const size_t n = v.numel();
  if (target_shape.empty() || target_shape.back() != n)
    throw ShapeError("expand_last: target shape " + shape_str(target_shape) +
                     " does not end in " + std::to_string(n));
  const size_t lead = shape_numel(target_shape) / n;
  std::vector<double> out_v(lead * n);
  for (size_t i = 0; i < lead; ++i)
    std::copy(v.values().begin(), v.values().end(), out_v.begin() + static_cast<long>(i * n));
  Tensor out = Tensor::from(target_shape, std::move(out_v));
  if (tape_active({&v})) {
    mark_output(out);
    auto vn = v.node();
    auto on = out.node();
    Tape::current()->record(on, [vn, on, lead, n] {
      vn->ensure_grad();
      kernels::col_sum_acc(on->grad.data(), vn->grad.data(), lead, n);
    });
  }
  return out;
}

Tensor slice_last(const Tensor& x, size_t start, size_t len) {
  if (x.ndim() == 0)
    throw ShapeError("slice_last: cannot slice a rank-0 tensor");
  const size_t last = x.shape().back();
  if (start + len > last)
    throw ShapeError("slice_last: slice [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for last axis of " +
                     shape_str(x.shape()));
  size_t lead = 1;
  for (size_t d = 0; d + 1 < x.ndim(); ++d) lead *= x.shape()[d];
  std::vector<double> out_v(lead * len);
  const auto& xv = x.values();
  for (size_t i = 0; i < lead; ++i)
    for (size_t j = 0; j < len; ++j) out_v[i * len + j] = xv[i * last + start + j];
  Shape out_shape = x.shape();
  out_shape.back() = len;
  Tensor out = Tensor::from(std::move(out_shape), std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, lead, len, last, start] {
      xn->ensure_grad();
      for (size_t i = 0; i < lead; ++i)
        for (size_t j = 0; j < len; ++j)
          xn->grad[i * last + start + j] += on->grad[i * len + j];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " +
                     shape_str(new_shape) + " changes the element count");
  Tensor out = Tensor::from(std::move(new_shape), x.values());
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on] {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return out;
}

Tensor slice_step(const Tensor& x, size_t t) {
  if (x.ndim() != 3)
    throw ShapeError("slice_step: expects a 3-d tensor, got " + shape_str(x.shape()));
  const size_t b = x.shape()[0], T = x.shape()[1], n = x.shape()[2];
  if (t >= T)
    throw ShapeError("slice_step: step " + std::to_string(t) + " out of range for " + shape_str(x.shape()));
  std::vector<double> out_v(b * n);
  const auto& xv = x.values();
  for (size_t i = 0; i < b; ++i)
    std::copy_n(xv.begin() + static_cast<long>((i * T + t) * n), n,
                out_v.begin() + static_cast<long>(i * n));
  Tensor out = Tensor::from({b, n}, std::move(out_v));
  if (tape_active({&x})) {
    mark_output(out);
    auto xn = x.node();
    auto on = out.node();
    Tape::current()->record(on, [xn, on, b, T, n, t] {
      xn->ensure_grad();
      for (size_t i = 0; i < b; ++i)
        for (size_t j = 0; j < n; ++j) xn->grad[(i * T + t) * n + j] += on->grad[i * n + j];
    });
  }
  return out;
}

Tensor stack_steps(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw ShapeError("stack_steps: empty step list");
  const Shape& s0 = steps[0].shape();
  if (s0.size() != 2)
    throw ShapeError("stack_steps: steps must be 2-d, got " + shape_str(s0));
  for (const auto& s : steps)
    if (s.shape() != s0)
      throw ShapeError("stack_steps: step shape " + shape_str(s.shape()) +
                       " differs from " + shape_str(s0));
  const size_t b = s0[0], n = s0[1], T = steps.size();
  std::vector<double> out_v(b * T * n);
  for (size_t t = 0; t < T; ++t) {
    const auto& sv = steps[t].values();
    for (size_t i = 0; i < b; ++i)
      std::copy_n(sv.begin() + static_cast<long>(i * n), n,
                  out_v.begin() + static_cast<long>((i * T + t) * n));
  }
  Tensor out = Tensor::from({b, T, n}, std::move(out_v));
  bool any_grad = false;
  for (const auto& s : steps) any_grad |= s.requires_grad();
  if (Tape::current() && any_grad) {
    mark_output(out);
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(T);
    for (const auto& s : steps) nodes.push_back(s.node());
    auto on = out.node();
    Tape::current()->record(on, [nodes, on, b, n, T] {
      for (size_t t = 0; t < T; ++t) {
        auto& sn = nodes[t];
        if (!sn->requires_grad) continue;
        sn->ensure_grad();
        for (size_t i = 0; i < b; ++i)
          for (size_t j = 0; j < n; ++j)
            sn->grad[i * n + j] += on->grad[(i * T + t) * n + j];
      }
    });
  }
  return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim() || a.ndim() == 0)
    throw ShapeError("concat_last: ranks disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  for (size_t d = 0; d + 1 < a.ndim(); ++d)
    if (a.shape()[d] != b.shape()[d])
      throw ShapeError("concat_last: leading dims disagree: " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  const size_t la = a.shape().back(), lb = b.shape().back();
  size_t lead = 1;
  for (size_t d = 0; d + 1 < a.ndim(); ++d) lead *= a.shape()[d];
  const size_t lo = la + lb;
  std::vector<double> out_v(lead * lo);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < lead; ++i) {
    std::copy_n(av.begin() + static_cast<long>(i * la), la, out_v.begin() + static_cast<long>(i * lo));
    std::copy_n(bv.begin() + static_cast<long>(i * lb), lb,
                out_v.begin() + static_cast<long>(i * lo + la));
  }
  Shape out_shape = a.shape();
  out_shape.back() = lo;
  Tensor out = Tensor::from(std::move(out_shape), std::move(out_v));
  if (tape_active({&a, &b})) {
    mark_output(out);
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    Tape::current()->record(on, [an, bn, on, lead, la, lb, lo] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < lead; ++i)
          for (size_t j = 0; j < la; ++j) an->grad[i * la + j] += on->grad[i * lo + j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < lead; ++i)
          for (size_t j = 0; j < lb; ++j) bn->grad[i * lb + j] += on->grad[i * lo + la + j];
      }
    });
  }
  return out;
}

// ----- finite differences ---------------------------------------------------

std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps) {
  if (!(eps > 0.0)) throw ValueError("finite_difference_grad: eps must be > 0");
  std::vector<double> grad(theta.size());
  std::vector<double> work = theta;
  for (size_t i = 0; i < theta.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + eps;
    const double fp = f(work);
    work[i] = orig - eps;
    const double fm = f(work);
    work[i] = orig;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

}  // namespace lfads
