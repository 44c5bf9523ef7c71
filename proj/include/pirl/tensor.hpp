#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pirl/common.hpp"

namespace pirl {

/// Dense tensor shape, 0 to 4 dimensions. A rank-0 shape denotes a scalar.
using Shape = std::vector<int>;

int shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// A persistent, named model parameter. Lives outside any tape; tapes bind to
/// it per step and backward() accumulates into `grad`. `momentum` belongs to
/// the SGD optimizer and is serialized with checkpoints.
template <class S>
struct Param {
  std::string name;
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;
  std::vector<S> momentum;

  Param() = default;
  Param(std::string name_, Shape shape_)
      : name(std::move(name_)),
        shape(std::move(shape_)),
        value(static_cast<size_t>(shape_numel(shape)), S(0)),
        grad(value.size(), S(0)),
        momentum(value.size(), S(0)) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

enum class Op : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  AddRowVec,
  MatMul,
  Relu,
  Conv2d,
  AvgPool2d,
  GlobalAvgPool,
  GatherRows,
  Reshape,
  ConcatLast,
  Dot,
  Sum,
  L2Normalize,
  NceLoss,
  NceProb,
  SoftmaxXent,
};

template <class S>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Shape& shape() const;
  std::span<const S> value() const;
  /// Gradient of the most recent backward() pass; empty if untracked.
  std::span<const S> grad() const;
  S scalar() const;
};

/// Reverse-mode automatic differentiation tape. Nodes are appended in
/// evaluation order, which is a topological order by construction; backward
/// walks them exactly once in reverse. Every op output is checked for
/// non-finite values and aborts the step with a diagnostic when one appears.
template <class S>
class Tape {
public:
  Tape() = default;
  explicit Tape(bool check_finite) : check_finite_(check_finite) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Untracked constant input.
  Var<S> constant(Shape shape, std::vector<S> data);
  /// Tracked input that is not bound to a Param (gradient readable via grad()).
  Var<S> leaf(Shape shape, std::vector<S> data, bool needs_grad = true);
  /// Tracked input bound to a persistent parameter; backward accumulates
  /// additively into p.grad.
  Var<S> param(Param<S>& p);

  /// Backward pass from a scalar node. Rejects non-scalar inputs. Calling it
  /// twice without zeroing grads doubles every accumulated gradient.
  void backward(Var<S> loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  bool check_finite() const { return check_finite_; }

private:
  struct Node {
    Op op;
    bool needs_grad = false;
    Shape shape;
    std::vector<S> val;
    std::vector<S> grad;
    std::vector<int> in;
    std::vector<int> iattr;
    std::vector<S> sattr;
    Param<S>* bound = nullptr;
  };

  std::vector<Node> nodes_;
  bool check_finite_ = true;

  int push(Node n);
  void check_node_finite(const Node& n) const;
  void backward_node(int id);

  template <class T>
  friend struct Var;
  template <class T>
  friend struct OpImpl;
};

// ---- ops -------------------------------------------------------------------

template <class S> Var<S> add(Var<S> a, Var<S> b);
template <class S> Var<S> sub(Var<S> a, Var<S> b);
template <class S> Var<S> mul(Var<S> a, Var<S> b);
template <class S> Var<S> scale(Var<S> a, S c);
/// x: [N,M], v: [M]; adds v to every row of x.
template <class S> Var<S> add_rowvec(Var<S> x, Var<S> v);
/// a: [M,K], b: [K,N] -> [M,N]
template <class S> Var<S> matmul(Var<S> a, Var<S> b);
template <class S> Var<S> relu(Var<S> x);

/// input: [N,C,H,W], kernel: [K,C,kh,kw], bias: [K]; H' = (H+2p-kh)/s + 1.
/// Direct convolution (cross-correlation); differentiable in all three inputs.
template <class S> Var<S> conv2d(Var<S> input, Var<S> kernel, Var<S> bias, int stride, int pad);

/// Non-overlapping-window mean pooling over [N,C,H,W]; H' = (H-win)/stride + 1.
template <class S> Var<S> avg_pool2d(Var<S> x, int win, int stride);
/// [N,C,H,W] -> [N,C], mean over the spatial extent.
template <class S> Var<S> global_avg_pool(Var<S> x);

/// x: [R,C]; out[i,:] = x[idx[i],:]. Backward scatter-adds.
template <class S> Var<S> gather_rows(Var<S> x, const std::vector<int>& idx);
template <class S> Var<S> reshape(Var<S> x, Shape shape);
/// Concatenates along the last axis; all leading extents must match.
template <class S> Var<S> concat_last(const std::vector<Var<S>>& xs);

template <class S> Var<S> dot(Var<S> a, Var<S> b);
template <class S> Var<S> sum(Var<S> x);

/// Normalizes along the last axis (vector or per row). Norms below 1e-12 are
/// rejected as "degenerate-embedding".
template <class S> Var<S> l2_normalize(Var<S> x);

/// Cosine similarity of two vectors, built from l2_normalize and dot.
template <class S> Var<S> cosine_similarity(Var<S> a, Var<S> b);

/// Probability that (anchor, candidate) is a data pair against the negatives:
///   h = exp(s(a,c)/tau) / (exp(s(a,c)/tau) + sum_j exp(s(c, n_j)/tau))
/// with s = cosine similarity; negatives are scored against the candidate
/// (the transformed-side representation). negs: [N,d].
template <class S> Var<S> nce_match_prob(Var<S> anchor, Var<S> candidate, Var<S> negs, S tau);

/// Binary-event NCE loss:
///   L = -log h(anchor, cand) - sum_j log(1 - h_j),
/// where h_j scores the candidate pair (cand, n_j) against the same negative
/// sum: h_j = exp(u_j) / (exp(u_j) + sum_k exp(u_k)), u_k = s(c, n_k)/tau.
/// The negative exponentials are summed in sorted value order, so the value is
/// independent of the order of the negatives.
template <class S> Var<S> nce_loss(Var<S> anchor, Var<S> candidate, Var<S> negs, S tau);

/// Mean softmax cross-entropy over the batch; logits: [N,C].
template <class S> Var<S> softmax_cross_entropy(Var<S> logits, const std::vector<int>& labels);

// ---- gradient oracle -------------------------------------------------------

/// Compares analytic gradients against central finite differences.
/// `eval(compute_grads)` must rebuild the scalar computation from the live
/// parameter values, run backward when asked, and return the loss value.
/// Returns max over all parameter entries of
///   |analytic - cd| / max(|analytic|, |cd|, 1e-8).
/// eps must lie in (0, 1e-2]; any non-finite value raises
/// "numerical-instability".
template <class S>
double finite_diff_check(const std::function<double(bool)>& eval,
                         std::span<Param<S>* const> params, double eps);

extern template struct Param<float>;
extern template struct Param<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template struct Var<float>;
extern template struct Var<double>;

}  // namespace pirl
