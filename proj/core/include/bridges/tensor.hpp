#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bridges/error.hpp"

namespace bridges {

using Shape = std::vector<long>;

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (const long d : s) n *= d;
  return n;
}

/// Suppresses tape recording inside its scope (evaluation-only forwards).
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  static bool active();
};

/// Boolean attention mask: allow(r,c) says whether row r may attend to
/// column c. Ops take it by shared_ptr; null means fully allowed.
struct AttnMask {
  long rows = 0, cols = 0;
  std::vector<std::uint8_t> allow;

  bool at(long r, long c) const { return allow[r * cols + c] != 0; }
  std::uint8_t& at(long r, long c) { return allow[r * cols + c]; }

  static AttnMask full(long rows, long cols, bool allowed = true) {
    AttnMask m;
    m.rows = rows;
    m.cols = cols;
    m.allow.assign(static_cast<std::size_t>(rows) * cols, allowed ? 1 : 0);
    return m;
  }
};

using AttnMaskPtr = std::shared_ptr<const AttnMask>;

/// Constant adjacency for neighbor-mean aggregation (built once per graph,
/// never differentiated through).
struct Adjacency {
  long rows = 0;
  std::vector<std::vector<std::uint32_t>> nbrs;
};
using AdjacencyPtr = std::shared_ptr<const Adjacency>;

/// Reverse-mode autodiff value. Value-semantics handle onto a shared tape
/// node; the tape is the implicit DAG of parent links. Instantiated for
/// float (the engine) and double (the finite-difference oracle's forward).
template <class S>
class TensorT {
public:
  struct Node {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // sized lazily by backward()
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
  };
  using NodePtr = std::shared_ptr<Node>;

  TensorT() = default;
  explicit TensorT(NodePtr n) : n_(std::move(n)) {}

  static TensorT zeros(Shape shape) {
    return from_data(shape, std::vector<S>(shape_numel(shape), S(0)));
  }
  static TensorT from_data(Shape shape, std::vector<S> data) {
    if (static_cast<long>(data.size()) != shape_numel(shape))
      throw ShapeMismatch("data length does not match shape");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return TensorT(std::move(n));
  }
  static TensorT scalar(double v) { return from_data({1}, {static_cast<S>(v)}); }
  static TensorT param(Shape shape, std::vector<S> data) {
    auto t = from_data(std::move(shape), std::move(data));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  long numel() const { return shape_numel(n_->shape); }
  long rows() const { return n_->shape.size() == 2 ? n_->shape[0] : 1; }
  long cols() const { return n_->shape.back(); }
  std::vector<S>& data() { return n_->data; }
  const std::vector<S>& data() const { return n_->data; }
  std::vector<S>& grad() { return n_->grad; }
  const std::vector<S>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) { n_->requires_grad = b; }
  S item() const {
    if (numel() != 1) throw ShapeMismatch("item() on non-scalar");
    return n_->data[0];
  }
  const NodePtr& node() const { return n_; }

private:
  NodePtr n_;
};

using Tensor = TensorT<float>;

// --- op surface (defined for S = float and double) ---

template <class S> TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> scale(const TensorT<S>& a, double c);
template <class S> TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);
/// y = x * W^T (+ bias); W is [out x in], bias [out] or undefined.
template <class S> TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias);
template <class S> TensorT<S> transpose(const TensorT<S>& a);
template <class S> TensorT<S> gelu(const TensorT<S>& x);
template <class S> TensorT<S> softmax_masked(const TensorT<S>& x, const AttnMaskPtr& mask);
template <class S> TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                                         const TensorT<S>& beta, double eps = 1e-5);
template <class S> TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& targets);
template <class S> TensorT<S> sum_all(const TensorT<S>& x);
template <class S> TensorT<S> mean_rows(const TensorT<S>& x);
template <class S> TensorT<S> colmax(const TensorT<S>& x);
template <class S> TensorT<S> l2_normalize_rows(const TensorT<S>& x);
template <class S> TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts);
template <class S> TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts);
template <class S> TensorT<S> slice_rows(const TensorT<S>& x, long r0, long r1);
template <class S> TensorT<S> embedding_rows(const TensorT<S>& table, const std::vector<int>& ids);
template <class S> TensorT<S> spmm_mean(const AdjacencyPtr& adj, const TensorT<S>& x);
/// Rows (mean, max, sum, min) columnwise over x, stacked in that order.
template <class S> TensorT<S> pool4(const TensorT<S>& x);
template <class S> TensorT<S> reciprocal(const TensorT<S>& s);
template <class S> TensorT<S> mul_scalar_param(const TensorT<S>& x, const TensorT<S>& s);
/// Fused masked multi-head attention. q [Sq x d], k/v [Sk x d]; masked pairs
/// are skipped in every loop, so outputs are bit-independent of masked
/// positions. Throws AllMaskedRow if a query row has no allowed key.
template <class S> TensorT<S> multihead_attention(const TensorT<S>& q, const TensorT<S>& k,
                                                  const TensorT<S>& v, const AttnMaskPtr& mask,
                                                  int n_heads);

/// Reverse accumulation from a scalar root. Non-leaf grads reset per call,
/// leaf grads accumulate across calls (zero_grad is the caller's job).
template <class S> void backward(const TensorT<S>& root);

}  // namespace bridges
