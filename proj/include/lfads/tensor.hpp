#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace lfads {

using Shape = std::vector<size_t>;

size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  bool is_leaf = true;

  void ensure_grad();
};

// Dense row-major f64 tensor; a cheap handle over a shared node. Rank 0 plus
// a single element acts as a scalar. Gradients live on the node and are
// filled in by Tape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  // Leaf with requires_grad set; the unit gradients accumulate into.
  static Tensor leaf(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  size_t ndim() const { return node_->shape.size(); }
  size_t numel() const { return node_->values.size(); }

  const std::vector<double>& values() const { return node_->values; }
  // Mutable access is for building inputs and applying optimizer updates to
  // leaves, never for tensors already recorded on a tape.
  std::vector<double>& values_mut() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  bool is_leaf() const { return node_->is_leaf; }

  const std::vector<double>& grad() const;
  std::vector<double>& grad_mut();
  void zero_grad();

  double item() const;
  double at(std::initializer_list<size_t> idx) const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
  friend Tensor make_tensor(Shape, std::vector<double>);
};

// Records backward closures in execution order during the forward pass.
// backward() zeroes every intermediate gradient, seeds d(loss)/d(loss) = 1
// and replays the closures in reverse; leaf gradients accumulate across
// calls until zero_grad. Install with TapeScope; no installed tape means
// inference mode (nothing recorded, outputs do not require grad).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<TensorNode> out, std::function<void()> fn);
  void backward(const Tensor& loss);
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  static Tape* current();

 private:
  struct Entry {
    std::shared_ptr<TensorNode> out;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
  friend class TapeScope;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// ----- elementwise / scalar ops -------------------------------------------
// Binary ops broadcast only between equal shapes or when one side has a
// single element; anything else throws ShapeError naming both shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor sub_scalar(const Tensor& x, double s);
Tensor rsub_scalar(double s, const Tensor& x);
Tensor mul_scalar(const Tensor& x, double s);
Tensor div_scalar(const Tensor& x, double s);
Tensor rdiv_scalar(double s, const Tensor& x);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);       // throws ValueError on x <= 0
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor lgamma(const Tensor& x);    // throws ValueError on x <= 0
Tensor digamma(const Tensor& x);   // throws ValueError on x <= 0
Tensor pow_scalar(const Tensor& x, double p);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return sub_scalar(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return rsub_scalar(s, a); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return div_scalar(a, s); }
inline Tensor operator/(double s, const Tensor& a) { return rdiv_scalar(s, a); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ----- linear algebra / structure ops --------------------------------------

// [m,k] x [k,n] -> [m,n]; inner-dimension mismatch throws ShapeError.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);  // 2-d only

// Sum / mean over the given axes (deduplicated, descending-applied). Empty
// axes list reduces everything to a rank-0 scalar. keep_dims not supported.
Tensor reduce_sum(const Tensor& x, std::vector<size_t> axes = {});
Tensor reduce_mean(const Tensor& x, std::vector<size_t> axes = {});

// Tile a vector [n] into [m,n] rows (bias broadcast; gradient column-sums).
Tensor expand0(const Tensor& v, size_t m);
// Broadcast a vector [n] over the leading dims of target_shape (whose last
// dim must be n).
Tensor expand_last(const Tensor& v, const Shape& target_shape);

// Same storage order, new dims (numel must match).
Tensor reshape(const Tensor& x, Shape new_shape);

// Contiguous slice along the last axis.
Tensor slice_last(const Tensor& x, size_t start, size_t len);
// x[b,T,n] -> timestep t as [b,n].
Tensor slice_step(const Tensor& x, size_t t);
// T tensors [b,n] -> [b,T,n].
Tensor stack_steps(const std::vector<Tensor>& steps);
// Concatenate along the last axis (leading dims must match).
Tensor concat_last(const Tensor& a, const Tensor& b);

// ----- gradient checking ----------------------------------------------------

// Central finite differences, independent of the tape machinery: perturbs
// theta one coordinate at a time and evaluates f twice per coordinate.
std::vector<double> finite_difference_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps = 1e-5);

}  // namespace lfads
