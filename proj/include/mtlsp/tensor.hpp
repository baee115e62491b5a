#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtlsp/errors.hpp"
#include "mtlsp/rng.hpp"

namespace mtlsp {

using Shape = std::vector<int64_t>;

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

}  // namespace detail

// Dense 64-bit tensor, row-major, rank 1 or 2. Value semantics over a
// shared node: ops never mutate an existing node, so handles are safe to
// copy and share. Scalars are shape {1}.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double value);
  // Validates size and finiteness of the payload.
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar_value(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(node_->values.size()); }
  // 2-D accessors; rank-1 tensors read as a single row.
  int64_t rows() const { return rank() == 2 ? dim(0) : 1; }
  int64_t cols() const { return rank() == 2 ? dim(1) : dim(0); }

  std::span<const double> values() const { return node_->values; }
  // In-place access for the optimizer; never call while a tape that saw
  // this tensor is still pending backward.
  std::span<double> values_mut() { return node_->values; }

  double at(int64_t r, int64_t c) const {
    return node_->values[static_cast<size_t>(r * cols() + c)];
  }
  double scalar() const;

  bool requires_grad() const { return node_->requires_grad; }

  // Accumulated gradient; zeros if nothing reached this tensor.
  Tensor grad() const;
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  const void* node_id() const { return node_.get(); }

 private:
  friend class Tape;
  friend struct OpAccess;
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of executed differentiable ops. backward() replays it
// once, in reverse execution order, then marks the tape consumed.
// A tape belongs to exactly one thread.
class Tape {
 public:
  void record(std::function<void()> back_fn) {
    ops_.push_back(std::move(back_fn));
  }
  size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

 private:
  friend void backward(Tape& tape, const Tensor& loss);
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

// --------------------------------------------------------------------
// Differentiable ops. `tape == nullptr` runs forward-only (inference).
// Every op validates shapes and rejects non-finite outputs.
// --------------------------------------------------------------------

// (m,k) x (k,n) -> (m,n); rank-1 inputs are treated as a single row.
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape* tape, const Tensor& a);
// Same shape, or (m,n) + (n): row-broadcast bias.
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double c);
Tensor relu(Tape* tape, const Tensor& a);
// Row-wise for rank 2, whole tensor for rank 1. Rows sum to 1.
Tensor softmax(Tape* tape, const Tensor& a);
// Row-wise normalization with learned gain/bias of width cols(x).
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps = 1e-5);
// table (V,d), ids in [0,V) -> (|ids|, d)
Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        const std::vector<int64_t>& ids);
// Inverted scaling at train time; identity when !training or ratio == 0.
Tensor dropout(Tape* tape, const Tensor& x, double ratio, Rng* rng,
               bool training);
// probs (T,K) rows summing to 1, targets in [0,K) -> scalar mean -log p.
Tensor cross_entropy(Tape* tape, const Tensor& probs,
                     const std::vector<int64_t>& targets);
Tensor concat(Tape* tape, const std::vector<Tensor>& parts, int axis);
Tensor slice(Tape* tape, const Tensor& x, int axis, int64_t start,
             int64_t len);
Tensor sum(Tape* tape, const Tensor& x);

// Reverse sweep from a scalar loss. Throws on empty or already-consumed
// tapes; a tape can be walked exactly once.
void backward(Tape& tape, const Tensor& loss);

}  // namespace mtlsp
