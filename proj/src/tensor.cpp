#include "pirl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "pirl/threading.hpp"

namespace pirl {

int shape_numel(const Shape& s) {
  PIRL_CHECK(s.size() <= 4, "tensor rank ", s.size(), " exceeds 4");
  int n = 1;
  for (int d : s) {
    PIRL_CHECK(d >= 0, "negative extent in shape ", shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddRowVec: return "add_rowvec";
    case Op::MatMul: return "matmul";
    case Op::Relu: return "relu";
    case Op::Conv2d: return "conv2d";
    case Op::AvgPool2d: return "avg_pool2d";
    case Op::GlobalAvgPool: return "global_avg_pool";
    case Op::GatherRows: return "gather_rows";
    case Op::Reshape: return "reshape";
    case Op::ConcatLast: return "concat_last";
    case Op::Dot: return "dot";
    case Op::Sum: return "sum";
    case Op::L2Normalize: return "l2_normalize";
    case Op::NceLoss: return "nce_loss";
    case Op::NceProb: return "nce_match_prob";
    case Op::SoftmaxXent: return "softmax_cross_entropy";
  }
  return "?";
}

// Fixed-association dot product: eight independent lanes, combined in a fixed
// order, so the result is identical across runs and thread counts while the
// lane loop still vectorizes.
template <class S>
S dot_span(const S* a, const S* b, size_t n) {
  S acc[8] = {S(0), S(0), S(0), S(0), S(0), S(0), S(0), S(0)};
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  S tail = S(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  S s0 = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  S s1 = (acc[4] + acc[5]) + (acc[6] + acc[7]);
  return (s0 + s1) + tail;
}

template <class S>
void axpy(S w, const S* x, S* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += w * x[i];
}

template <class S>
S stable_softplus(S z) {
  if (z > S(0)) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

template <class S>
S stable_sigmoid(S z) {
  if (z >= S(0)) return S(1) / (S(1) + std::exp(-z));
  S e = std::exp(z);
  return e / (S(1) + e);
}

}  // namespace

// ---- Var accessors ----------------------------------------------------------

template <class S>
const Shape& Var<S>::shape() const {
  return tape->nodes_[id].shape;
}

template <class S>
std::span<const S> Var<S>::value() const {
  return tape->nodes_[id].val;
}

template <class S>
std::span<const S> Var<S>::grad() const {
  return tape->nodes_[id].grad;
}

template <class S>
S Var<S>::scalar() const {
  const auto& n = tape->nodes_[id];
  PIRL_CHECK(n.val.size() == 1, "scalar() on tensor of shape ", shape_str(n.shape));
  return n.val[0];
}

// ---- Tape -------------------------------------------------------------------

template <class S>
void Tape<S>::check_node_finite(const Node& n) const {
  for (S v : n.val)
    PIRL_CHECK_NUMERIC(std::isfinite(static_cast<double>(v)), "non-finite value produced by ",
                       op_name(n.op), " with output shape ", shape_str(n.shape));
}

template <class S>
int Tape<S>::push(Node n) {
  PIRL_CHECK(static_cast<int>(n.val.size()) == shape_numel(n.shape),
             "node buffer length ", n.val.size(), " does not match shape ", shape_str(n.shape));
  if (check_finite_) check_node_finite(n);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

template <class S>
Var<S> Tape<S>::constant(Shape shape, std::vector<S> data) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = false;
  n.shape = std::move(shape);
  n.val = std::move(data);
  return {this, push(std::move(n))};
}

template <class S>
Var<S> Tape<S>::leaf(Shape shape, std::vector<S> data, bool needs_grad) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = needs_grad;
  n.shape = std::move(shape);
  n.val = std::move(data);
  return {this, push(std::move(n))};
}

template <class S>
Var<S> Tape<S>::param(Param<S>& p) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = true;
  n.shape = p.shape;
  n.val = p.value;
  n.bound = &p;
  return {this, push(std::move(n))};
}

// ---- op construction helpers --------------------------------------------------

template <class S>
struct OpImpl {
  using Node = typename Tape<S>::Node;

  static Node& node(Tape<S>& t, int id) { return t.nodes_[id]; }
  static const Node& node(const Tape<S>& t, int id) { return t.nodes_[id]; }

  static Var<S> push(Tape<S>& t, Node n) { return {&t, t.push(std::move(n))}; }

  static Node make(Op op, Shape shape, const std::vector<Var<S>>& inputs) {
    Node n;
    n.op = op;
    n.shape = std::move(shape);
    n.needs_grad = false;
    for (const auto& v : inputs) {
      PIRL_CHECK(v.valid(), "op input is not a valid tape node");
      n.in.push_back(v.id);
      if (node(*v.tape, v.id).needs_grad) n.needs_grad = true;
    }
    n.val.assign(static_cast<size_t>(shape_numel(n.shape)), S(0));
    return n;
  }
};

namespace {

template <class S>
Tape<S>& tape_of(const std::vector<Var<S>>& vs) {
  PIRL_CHECK(!vs.empty() && vs[0].valid(), "op requires at least one input");
  Tape<S>* t = vs[0].tape;
  for (const auto& v : vs) PIRL_CHECK(v.tape == t, "op inputs belong to different tapes");
  return *t;
}

}  // namespace

// ---- forward implementations --------------------------------------------------

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  auto& t = tape_of<S>({a, b});
  PIRL_CHECK(a.shape() == b.shape(), "add: shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
  auto n = OpImpl<S>::make(Op::Add, a.shape(), {a, b});
  auto av = a.value(), bv = b.value();
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = av[i] + bv[i];
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  auto& t = tape_of<S>({a, b});
  PIRL_CHECK(a.shape() == b.shape(), "sub: shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
  auto n = OpImpl<S>::make(Op::Sub, a.shape(), {a, b});
  auto av = a.value(), bv = b.value();
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = av[i] - bv[i];
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  auto& t = tape_of<S>({a, b});
  PIRL_CHECK(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
  auto n = OpImpl<S>::make(Op::Mul, a.shape(), {a, b});
  auto av = a.value(), bv = b.value();
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = av[i] * bv[i];
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> scale(Var<S> a, S c) {
  auto& t = tape_of<S>({a});
  auto n = OpImpl<S>::make(Op::Scale, a.shape(), {a});
  n.sattr = {c};
  auto av = a.value();
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = c * av[i];
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> add_rowvec(Var<S> x, Var<S> v) {
  auto& t = tape_of<S>({x, v});
  PIRL_CHECK(x.shape().size() == 2 && v.shape().size() == 1 && x.shape()[1] == v.shape()[0],
             "add_rowvec: shapes ", shape_str(x.shape()), " and ", shape_str(v.shape()));
  auto n = OpImpl<S>::make(Op::AddRowVec, x.shape(), {x, v});
  const int rows = x.shape()[0], cols = x.shape()[1];
  auto xv = x.value(), vv = v.value();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) n.val[i * cols + j] = xv[i * cols + j] + vv[j];
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  auto& t = tape_of<S>({a, b});
  PIRL_CHECK(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
             "matmul: shape mismatch ", shape_str(a.shape()), " x ", shape_str(b.shape()));
  const int M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  auto n = OpImpl<S>::make(Op::MatMul, {M, N}, {a, b});
  const S* av = a.value().data();
  const S* bv = b.value().data();
  S* out = n.val.data();
  parallel_for(static_cast<size_t>(M), [&](size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i)
      for (int k = 0; k < K; ++k)
        axpy(av[i * K + k], bv + static_cast<size_t>(k) * N, out + i * N, static_cast<size_t>(N));
  });
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> relu(Var<S> x) {
  auto& t = tape_of<S>({x});
  auto n = OpImpl<S>::make(Op::Relu, x.shape(), {x});
  auto xv = x.value();
  for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = xv[i] > S(0) ? xv[i] : S(0);
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> conv2d(Var<S> input, Var<S> kernel, Var<S> bias, int stride, int pad) {
  auto& t = tape_of<S>({input, kernel, bias});
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  PIRL_CHECK(xs.size() == 4 && ks.size() == 4, "conv2d: input ", shape_str(xs), " and kernel ",
             shape_str(ks), " must both be rank 4");
  PIRL_CHECK(xs[1] == ks[1], "conv2d: channel mismatch between input ", shape_str(xs),
             " and kernel ", shape_str(ks));
  PIRL_CHECK(bias.shape().size() == 1 && bias.shape()[0] == ks[0], "conv2d: bias ",
             shape_str(bias.shape()), " must be [", ks[0], "]");
  PIRL_CHECK(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
  PIRL_CHECK(pad >= 0, "conv2d: pad must be >= 0, got ", pad);
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int K = ks[0], KH = ks[2], KW = ks[3];
  PIRL_CHECK(KH <= H + 2 * pad && KW <= W + 2 * pad, "conv2d: kernel ", shape_str(ks),
             " larger than padded input ", shape_str(xs), " with pad ", pad);
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;

  auto n = OpImpl<S>::make(Op::Conv2d, {N, K, OH, OW}, {input, kernel, bias});
  n.iattr = {stride, pad};
  const S* in = input.value().data();
  const S* kr = kernel.value().data();
  const S* bs = bias.value().data();
  S* out = n.val.data();

  parallel_for(static_cast<size_t>(N) * K, [&](size_t lo, size_t hi) {
    for (size_t nk = lo; nk < hi; ++nk) {
      const int ni = static_cast<int>(nk) / K;
      const int k = static_cast<int>(nk) % K;
      S* oplane = out + (static_cast<size_t>(ni) * K + k) * OH * OW;
      for (int i = 0; i < OH * OW; ++i) oplane[i] = bs[k];
      for (int c = 0; c < C; ++c) {
        const S* iplane = in + (static_cast<size_t>(ni) * C + c) * H * W;
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const S w = kr[((static_cast<size_t>(k) * C + c) * KH + kh) * KW + kw];
            for (int oh = 0; oh < OH; ++oh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= H) continue;
              S* orow = oplane + static_cast<size_t>(oh) * OW;
              const S* irow = iplane + static_cast<size_t>(ih) * W;
              if (stride == 1) {
                const int off = kw - pad;
                const int lo_ow = std::max(0, -off);
                const int hi_ow = std::min(OW, W - off);
                for (int ow = lo_ow; ow < hi_ow; ++ow) orow[ow] += w * irow[ow + off];
              } else {
                for (int ow = 0; ow < OW; ++ow) {
                  const int iw = ow * stride - pad + kw;
                  if (iw >= 0 && iw < W) orow[ow] += w * irow[iw];
                }
              }
            }
          }
        }
      }
    }
  });
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> avg_pool2d(Var<S> x, int win, int stride) {
  auto& t = tape_of<S>({x});
  const Shape& xs = x.shape();
  PIRL_CHECK(xs.size() == 4, "avg_pool2d: input must be rank 4, got ", shape_str(xs));
  PIRL_CHECK(win >= 1 && stride >= 1, "avg_pool2d: window/stride must be >= 1");
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  PIRL_CHECK(win <= H && win <= W, "avg_pool2d: window ", win, " larger than input ",
             shape_str(xs));
  const int OH = (H - win) / stride + 1;
  const int OW = (W - win) / stride + 1;
  auto n = OpImpl<S>::make(Op::AvgPool2d, {N, C, OH, OW}, {x});
  n.iattr = {win, stride};
  const S* in = x.value().data();
  S* out = n.val.data();
  const S inv = S(1) / static_cast<S>(win * win);
  for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
    const S* ip = in + nc * H * W;
    S* op = out + nc * OH * OW;
    for (int oh = 0; oh < OH; ++oh)
      for (int ow = 0; ow < OW; ++ow) {
        S acc = S(0);
        for (int a = 0; a < win; ++a)
          for (int b = 0; b < win; ++b) acc += ip[(oh * stride + a) * W + ow * stride + b];
        op[oh * OW + ow] = acc * inv;
      }
  }
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> global_avg_pool(Var<S> x) {
  auto& t = tape_of<S>({x});
  const Shape& xs = x.shape();
  PIRL_CHECK(xs.size() == 4, "global_avg_pool: input must be rank 4, got ", shape_str(xs));
  const int N = xs[0], C = xs[1], HW = xs[2] * xs[3];
  PIRL_CHECK(HW > 0, "global_avg_pool: empty spatial extent in ", shape_str(xs));
  auto n = OpImpl<S>::make(Op::GlobalAvgPool, {N, C}, {x});
  const S* in = x.value().data();
  const S inv = S(1) / static_cast<S>(HW);
  for (size_t nc = 0; nc < static_cast<size_t>(N) * C; ++nc) {
    S acc = S(0);
    const S* p = in + nc * HW;
    for (int i = 0; i < HW; ++i) acc += p[i];
    n.val[nc] = acc * inv;
  }
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> gather_rows(Var<S> x, const std::vector<int>& idx) {
  auto& t = tape_of<S>({x});
  const Shape& xs = x.shape();
  PIRL_CHECK(xs.size() == 2, "gather_rows: input must be rank 2, got ", shape_str(xs));
  const int R = xs[0], C = xs[1];
  for (int i : idx)
    PIRL_CHECK(i >= 0 && i < R, "gather_rows: index ", i, " out of range for ", shape_str(xs));
  auto n = OpImpl<S>::make(Op::GatherRows, {static_cast<int>(idx.size()), C}, {x});
  n.iattr = idx;
  const S* in = x.value().data();
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(in + static_cast<size_t>(idx[i]) * C, in + static_cast<size_t>(idx[i] + 1) * C,
              n.val.begin() + i * C);
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> reshape(Var<S> x, Shape shape) {
  auto& t = tape_of<S>({x});
  PIRL_CHECK(shape_numel(shape) == shape_numel(x.shape()), "reshape: cannot view ",
             shape_str(x.shape()), " as ", shape_str(shape));
  auto n = OpImpl<S>::make(Op::Reshape, std::move(shape), {x});
  auto xv = x.value();
  std::copy(xv.begin(), xv.end(), n.val.begin());
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> concat_last(const std::vector<Var<S>>& xs) {
  PIRL_CHECK(!xs.empty(), "concat_last: needs at least one input");
  auto& t = tape_of<S>(xs);
  const Shape& s0 = xs[0].shape();
  PIRL_CHECK(!s0.empty(), "concat_last: inputs must have rank >= 1");
  int last_total = 0;
  for (const auto& v : xs) {
    const Shape& s = v.shape();
    PIRL_CHECK(s.size() == s0.size(), "concat_last: rank mismatch ", shape_str(s0), " vs ",
               shape_str(s));
    for (size_t d = 0; d + 1 < s.size(); ++d)
      PIRL_CHECK(s[d] == s0[d], "concat_last: leading extent mismatch ", shape_str(s0), " vs ",
                 shape_str(s));
    last_total += s.back();
  }
  Shape out = s0;
  out.back() = last_total;
  int lead = 1;
  for (size_t d = 0; d + 1 < s0.size(); ++d) lead *= s0[d];

  auto n = OpImpl<S>::make(Op::ConcatLast, out, xs);
  size_t off = 0;
  for (const auto& v : xs) {
    const int c = v.shape().back();
    const S* in = v.value().data();
    for (int r = 0; r < lead; ++r)
      std::copy(in + static_cast<size_t>(r) * c, in + static_cast<size_t>(r + 1) * c,
                n.val.begin() + static_cast<size_t>(r) * last_total + off);
    off += static_cast<size_t>(c);
  }
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> dot(Var<S> a, Var<S> b) {
  auto& t = tape_of<S>({a, b});
  PIRL_CHECK(a.shape().size() == 1 && a.shape() == b.shape(), "dot: shapes ",
             shape_str(a.shape()), " and ", shape_str(b.shape()), " must be equal rank-1");
  auto n = OpImpl<S>::make(Op::Dot, {}, {a, b});
  n.val[0] = dot_span(a.value().data(), b.value().data(), a.value().size());
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> sum(Var<S> x) {
  auto& t = tape_of<S>({x});
  auto n = OpImpl<S>::make(Op::Sum, {}, {x});
  S acc = S(0);
  for (S v : x.value()) acc += v;
  n.val[0] = acc;
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> l2_normalize(Var<S> x) {
  auto& t = tape_of<S>({x});
  const Shape& xs = x.shape();
  PIRL_CHECK(xs.size() == 1 || xs.size() == 2, "l2_normalize: rank must be 1 or 2, got ",
             shape_str(xs));
  const int rows = xs.size() == 2 ? xs[0] : 1;
  const int d = xs.back();
  PIRL_CHECK(d > 0, "l2_normalize: empty vector");
  auto n = OpImpl<S>::make(Op::L2Normalize, xs, {x});
  const S* in = x.value().data();
  n.sattr.resize(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const S* row = in + static_cast<size_t>(r) * d;
    const S norm = std::sqrt(dot_span(row, row, static_cast<size_t>(d)));
    PIRL_CHECK_NUMERIC(norm > S(1e-12), "degenerate-embedding: norm ", norm,
                       " below 1e-12 in l2_normalize");
    n.sattr[static_cast<size_t>(r)] = norm;
    for (int j = 0; j < d; ++j) n.val[static_cast<size_t>(r) * d + j] = row[j] / norm;
  }
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> cosine_similarity(Var<S> a, Var<S> b) {
  return dot(l2_normalize(a), l2_normalize(b));
}

namespace {

// Shared forward state of the NCE ops. u_p = s(anchor,cand)/tau,
// u[j] = s(cand,neg_j)/tau, lse = log sum_j exp(u[j]); exponentials are summed
// in sorted value order so the result does not depend on negative order.
template <class S>
struct NceState {
  S tau;
  S u_p;
  S lse;
  std::vector<S> u;
  std::vector<S> anorm;  // [anchor, cand, neg_0..neg_{N-1}]
};

template <class S>
NceState<S> nce_forward(Var<S> anchor, Var<S> cand, Var<S> negs, S tau,
                        std::vector<S>* norm_anchor_buf, std::vector<S>* norm_cand_buf,
                        std::vector<S>* norm_negs_buf) {
  PIRL_CHECK(tau > S(0), "nce: temperature must be positive, got ", tau);
  PIRL_CHECK(anchor.shape().size() == 1 && cand.shape().size() == 1 &&
                 negs.shape().size() == 2,
             "nce: anchor/candidate must be vectors and negatives a matrix, got ",
             shape_str(anchor.shape()), ", ", shape_str(cand.shape()), ", ",
             shape_str(negs.shape()));
  const int d = anchor.shape()[0];
  PIRL_CHECK(cand.shape()[0] == d && negs.shape()[1] == d, "nce: embedding dims differ: ",
             shape_str(anchor.shape()), ", ", shape_str(cand.shape()), ", ",
             shape_str(negs.shape()));
  const int N = negs.shape()[0];
  PIRL_CHECK(N >= 1, "nce: needs at least one negative");

  auto normalize = [d](const S* v, std::vector<S>& out) -> S {
    const S norm = std::sqrt(dot_span(v, v, static_cast<size_t>(d)));
    PIRL_CHECK_NUMERIC(norm > S(1e-12), "degenerate-embedding: norm ", norm, " in nce input");
    out.resize(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] = v[j] / norm;
    return norm;
  };

  NceState<S> st;
  st.tau = tau;
  st.anorm.resize(static_cast<size_t>(N) + 2);
  st.anorm[0] = normalize(anchor.value().data(), *norm_anchor_buf);
  st.anorm[1] = normalize(cand.value().data(), *norm_cand_buf);

  norm_negs_buf->resize(static_cast<size_t>(N) * d);
  st.u.resize(static_cast<size_t>(N));
  const S* nv = negs.value().data();
  std::vector<S> nrow;
  for (int j = 0; j < N; ++j) {
    st.anorm[static_cast<size_t>(j) + 2] = normalize(nv + static_cast<size_t>(j) * d, nrow);
    std::copy(nrow.begin(), nrow.end(), norm_negs_buf->begin() + static_cast<size_t>(j) * d);
    st.u[static_cast<size_t>(j)] =
        dot_span(norm_cand_buf->data(), norm_negs_buf->data() + static_cast<size_t>(j) * d,
                 static_cast<size_t>(d)) /
        tau;
  }
  st.u_p = dot_span(norm_anchor_buf->data(), norm_cand_buf->data(), static_cast<size_t>(d)) / tau;

  std::vector<S> sorted = st.u;
  std::sort(sorted.begin(), sorted.end());
  const S m = sorted.back();
  S acc = S(0);
  for (S u : sorted) acc += std::exp(u - m);
  st.lse = m + std::log(acc);
  return st;
}

// sattr layout shared by NceLoss and NceProb:
// [tau, u_p, lse, N, anorm(anchor), anorm(cand), u_0..u_{N-1}, anorm(neg_0..neg_{N-1})]
template <class S>
std::vector<S> nce_pack(const NceState<S>& st) {
  std::vector<S> sa;
  const size_t N = st.u.size();
  sa.reserve(5 + 2 * N);
  sa.push_back(st.tau);
  sa.push_back(st.u_p);
  sa.push_back(st.lse);
  sa.push_back(static_cast<S>(N));
  sa.push_back(st.anorm[0]);
  sa.push_back(st.anorm[1]);
  for (size_t j = 0; j < N; ++j) sa.push_back(st.u[j]);
  for (size_t j = 0; j < N; ++j) sa.push_back(st.anorm[j + 2]);
  return sa;
}

}  // namespace

template <class S>
Var<S> nce_match_prob(Var<S> anchor, Var<S> candidate, Var<S> negs, S tau) {
  auto& t = tape_of<S>({anchor, candidate, negs});
  std::vector<S> na, nc, nn;
  auto st = nce_forward(anchor, candidate, negs, tau, &na, &nc, &nn);
  auto n = OpImpl<S>::make(Op::NceProb, {}, {anchor, candidate, negs});
  n.sattr = nce_pack(st);
  n.val[0] = stable_sigmoid(st.u_p - st.lse);
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> nce_loss(Var<S> anchor, Var<S> candidate, Var<S> negs, S tau) {
  auto& t = tape_of<S>({anchor, candidate, negs});
  std::vector<S> na, nc, nn;
  auto st = nce_forward(anchor, candidate, negs, tau, &na, &nc, &nn);
  auto n = OpImpl<S>::make(Op::NceLoss, {}, {anchor, candidate, negs});
  n.sattr = nce_pack(st);

  std::vector<S> sorted = st.u;
  std::sort(sorted.begin(), sorted.end());
  S loss = stable_softplus(st.lse - st.u_p);
  for (S u : sorted) loss += stable_softplus(u - st.lse);
  n.val[0] = loss;
  return OpImpl<S>::push(t, std::move(n));
}

template <class S>
Var<S> softmax_cross_entropy(Var<S> logits, const std::vector<int>& labels) {
  auto& t = tape_of<S>({logits});
  const Shape& ls = logits.shape();
  PIRL_CHECK(ls.size() == 2, "softmax_cross_entropy: logits must be [N,C], got ", shape_str(ls));
  const int N = ls[0], C = ls[1];
  PIRL_CHECK(static_cast<int>(labels.size()) == N, "softmax_cross_entropy: ", labels.size(),
             " labels for ", N, " rows");
  for (int y : labels)
    PIRL_CHECK(y >= 0 && y < C, "softmax_cross_entropy: label ", y, " outside [0,", C, ")");
  auto n = OpImpl<S>::make(Op::SoftmaxXent, {}, {logits});
  n.iattr = labels;
  const S* lv = logits.value().data();
  S total = S(0);
  for (int i = 0; i < N; ++i) {
    const S* row = lv + static_cast<size_t>(i) * C;
    S m = row[0];
    for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
    S acc = S(0);
    for (int j = 0; j < C; ++j) acc += std::exp(row[j] - m);
    total += m + std::log(acc) - row[labels[static_cast<size_t>(i)]];
  }
  n.val[0] = total / static_cast<S>(N);
  return OpImpl<S>::push(t, std::move(n));
}

// ---- backward ----------------------------------------------------------------

template <class S>
void Tape<S>::backward(Var<S> loss) {
  PIRL_CHECK(loss.valid() && loss.tape == this, "backward: node does not belong to this tape");
  Node& ln = nodes_[loss.id];
  PIRL_CHECK(ln.val.size() == 1, "backward: loss must be scalar, got shape ",
             shape_str(ln.shape));
  for (int i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs_grad) n.grad.assign(n.val.size(), S(0));
  }
  if (!ln.needs_grad) return;  // constant loss: all grads stay zero
  ln.grad[0] = S(1);
  for (int i = loss.id; i >= 0; --i)
    if (nodes_[static_cast<size_t>(i)].needs_grad) backward_node(i);
}

template <class S>
void Tape<S>::backward_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  auto in_node = [this](int i) -> Node& { return nodes_[static_cast<size_t>(i)]; };
  auto wants = [&](int slot) {
    return in_node(n.in[static_cast<size_t>(slot)]).needs_grad;
  };
  auto gin = [&](int slot) -> std::vector<S>& {
    return in_node(n.in[static_cast<size_t>(slot)]).grad;
  };
  auto vin = [&](int slot) -> const std::vector<S>& {
    return in_node(n.in[static_cast<size_t>(slot)]).val;
  };
  const std::vector<S>& g = n.grad;

  switch (n.op) {
    case Op::Leaf: {
      if (n.bound != nullptr)
        for (size_t i = 0; i < g.size(); ++i) n.bound->grad[i] += g[i];
      break;
    }
    case Op::Add: {
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      if (wants(1)) for (size_t i = 0; i < g.size(); ++i) gin(1)[i] += g[i];
      break;
    }
    case Op::Sub: {
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      if (wants(1)) for (size_t i = 0; i < g.size(); ++i) gin(1)[i] -= g[i];
      break;
    }
    case Op::Mul: {
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i] * vin(1)[i];
      if (wants(1)) for (size_t i = 0; i < g.size(); ++i) gin(1)[i] += g[i] * vin(0)[i];
      break;
    }
    case Op::Scale: {
      const S c = n.sattr[0];
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += c * g[i];
      break;
    }
    case Op::AddRowVec: {
      const int rows = n.shape[0], cols = n.shape[1];
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      if (wants(1)) {
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < cols; ++j) gin(1)[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * cols + j];
      }
      break;
    }
    case Op::MatMul: {
      const int M = n.shape[0], N2 = n.shape[1];
      const int K = in_node(n.in[0]).shape[1];
      const S* gv = g.data();
      if (wants(0)) {
        const S* bv = vin(1).data();
        S* ga = gin(0).data();
        parallel_for(static_cast<size_t>(M), [&](size_t lo, size_t hi) {
          for (size_t i = lo; i < hi; ++i)
            for (int k = 0; k < K; ++k)
              ga[i * K + k] += dot_span(gv + i * N2, bv + static_cast<size_t>(k) * N2,
                                        static_cast<size_t>(N2));
        });
      }
      if (wants(1)) {
        const S* av = vin(0).data();
        S* gb = gin(1).data();
        for (int i = 0; i < M; ++i)
          for (int k = 0; k < K; ++k)
            axpy(av[static_cast<size_t>(i) * K + k], gv + static_cast<size_t>(i) * N2,
                 gb + static_cast<size_t>(k) * N2, static_cast<size_t>(N2));
      }
      break;
    }
    case Op::Relu: {
      if (wants(0)) {
        const std::vector<S>& x = vin(0);
        for (size_t i = 0; i < g.size(); ++i)
          if (x[i] > S(0)) gin(0)[i] += g[i];
      }
      break;
    }
    case Op::Conv2d: {
      const int stride = n.iattr[0], pad = n.iattr[1];
      const Shape& xs = in_node(n.in[0]).shape;
      const Shape& ks = in_node(n.in[1]).shape;
      const int N0 = xs[0], C = xs[1], H = xs[2], W = xs[3];
      const int K = ks[0], KH = ks[2], KW = ks[3];
      const int OH = n.shape[2], OW = n.shape[3];
      const S* gv = g.data();
      if (wants(2)) {
        S* gb = gin(2).data();
        for (int ni = 0; ni < N0; ++ni)
          for (int k = 0; k < K; ++k) {
            const S* gp = gv + (static_cast<size_t>(ni) * K + k) * OH * OW;
            S acc = S(0);
            for (int i = 0; i < OH * OW; ++i) acc += gp[i];
            gb[k] += acc;
          }
      }
      if (wants(0)) {
        const S* kr = vin(1).data();
        S* gx = gin(0).data();
        parallel_for(static_cast<size_t>(N0) * C, [&](size_t lo, size_t hi) {
          for (size_t nc = lo; nc < hi; ++nc) {
            const int ni = static_cast<int>(nc) / C;
            const int c = static_cast<int>(nc) % C;
            S* gplane = gx + nc * H * W;
            for (int k = 0; k < K; ++k) {
              const S* gout = gv + (static_cast<size_t>(ni) * K + k) * OH * OW;
              for (int kh = 0; kh < KH; ++kh)
                for (int kw = 0; kw < KW; ++kw) {
                  const S w = kr[((static_cast<size_t>(k) * C + c) * KH + kh) * KW + kw];
                  for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    S* grow = gplane + static_cast<size_t>(ih) * W;
                    const S* gorow = gout + static_cast<size_t>(oh) * OW;
                    if (stride == 1) {
                      const int off = kw - pad;
                      const int lo_ow = std::max(0, -off);
                      const int hi_ow = std::min(OW, W - off);
                      for (int ow = lo_ow; ow < hi_ow; ++ow) grow[ow + off] += w * gorow[ow];
                    } else {
                      for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw >= 0 && iw < W) grow[iw] += w * gorow[ow];
                      }
                    }
                  }
                }
            }
          }
        });
      }
      if (wants(1)) {
        const S* xv = vin(0).data();
        S* gk = gin(1).data();
        parallel_for(static_cast<size_t>(K) * C, [&](size_t lo, size_t hi) {
          for (size_t kc = lo; kc < hi; ++kc) {
            const int k = static_cast<int>(kc) / C;
            const int c = static_cast<int>(kc) % C;
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                S acc = S(0);
                for (int ni = 0; ni < N0; ++ni) {
                  const S* gout = gv + (static_cast<size_t>(ni) * K + k) * OH * OW;
                  const S* iplane = xv + (static_cast<size_t>(ni) * C + c) * H * W;
                  for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    const S* irow = iplane + static_cast<size_t>(ih) * W;
                    const S* gorow = gout + static_cast<size_t>(oh) * OW;
                    if (stride == 1) {
                      const int off = kw - pad;
                      const int lo_ow = std::max(0, -off);
                      const int hi_ow = std::min(OW, W - off);
                      if (hi_ow > lo_ow)
                        acc += dot_span(gorow + lo_ow, irow + lo_ow + off,
                                        static_cast<size_t>(hi_ow - lo_ow));
                    } else {
                      for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw >= 0 && iw < W) acc += gorow[ow] * irow[iw];
                      }
                    }
                  }
                }
                gk[((static_cast<size_t>(k) * C + c) * KH + kh) * KW + kw] += acc;
              }
          }
        });
      }
      break;
    }
    case Op::AvgPool2d: {
      if (!wants(0)) break;
      const int win = n.iattr[0], stride = n.iattr[1];
      const Shape& xs = in_node(n.in[0]).shape;
      const int H = xs[2], W = xs[3];
      const int OH = n.shape[2], OW = n.shape[3];
      const S inv = S(1) / static_cast<S>(win * win);
      S* gx = gin(0).data();
      const S* gv = g.data();
      const size_t planes = static_cast<size_t>(xs[0]) * xs[1];
      for (size_t nc = 0; nc < planes; ++nc) {
        const S* gp = gv + nc * OH * OW;
        S* gxp = gx + nc * H * W;
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            const S v = gp[oh * OW + ow] * inv;
            for (int a = 0; a < win; ++a)
              for (int b = 0; b < win; ++b) gxp[(oh * stride + a) * W + ow * stride + b] += v;
          }
      }
      break;
    }
    case Op::GlobalAvgPool: {
      if (!wants(0)) break;
      const Shape& xs = in_node(n.in[0]).shape;
      const int HW = xs[2] * xs[3];
      const S inv = S(1) / static_cast<S>(HW);
      S* gx = gin(0).data();
      const size_t planes = static_cast<size_t>(xs[0]) * xs[1];
      for (size_t nc = 0; nc < planes; ++nc) {
        const S v = g[nc] * inv;
        for (int i = 0; i < HW; ++i) gx[nc * HW + i] += v;
      }
      break;
    }
    case Op::GatherRows: {
      if (!wants(0)) break;
      const int C = n.shape[1];
      S* gx = gin(0).data();
      for (size_t i = 0; i < n.iattr.size(); ++i) {
        const size_t src = i * static_cast<size_t>(C);
        const size_t dst = static_cast<size_t>(n.iattr[i]) * C;
        for (int j = 0; j < C; ++j) gx[dst + j] += g[src + j];
      }
      break;
    }
    case Op::Reshape: {
      if (wants(0)) for (size_t i = 0; i < g.size(); ++i) gin(0)[i] += g[i];
      break;
    }
    case Op::ConcatLast: {
      const int total = n.shape.back();
      int lead = 1;
      for (size_t d = 0; d + 1 < n.shape.size(); ++d) lead *= n.shape[d];
      size_t off = 0;
      for (size_t s = 0; s < n.in.size(); ++s) {
        const int c = in_node(n.in[s]).shape.back();
        if (in_node(n.in[s]).needs_grad) {
          S* gx = in_node(n.in[s]).grad.data();
          for (int r = 0; r < lead; ++r)
            for (int j = 0; j < c; ++j)
              gx[static_cast<size_t>(r) * c + j] += g[static_cast<size_t>(r) * total + off + j];
        }
        off += static_cast<size_t>(c);
      }
      break;
    }
    case Op::Dot: {
      const S go = g[0];
      if (wants(0)) {
        const std::vector<S>& b = vin(1);
        for (size_t i = 0; i < b.size(); ++i) gin(0)[i] += go * b[i];
      }
      if (wants(1)) {
        const std::vector<S>& a = vin(0);
        for (size_t i = 0; i < a.size(); ++i) gin(1)[i] += go * a[i];
      }
      break;
    }
    case Op::Sum: {
      if (wants(0)) {
        const S go = g[0];
        for (auto& v : gin(0)) v += go;
      }
      break;
    }
    case Op::L2Normalize: {
      if (!wants(0)) break;
      const int d = n.shape.back();
      const int rows = static_cast<int>(n.sattr.size());
      S* gx = gin(0).data();
      for (int r = 0; r < rows; ++r) {
        const S* y = n.val.data() + static_cast<size_t>(r) * d;
        const S* gy = g.data() + static_cast<size_t>(r) * d;
        const S norm = n.sattr[static_cast<size_t>(r)];
        const S yg = dot_span(y, gy, static_cast<size_t>(d));
        for (int j = 0; j < d; ++j)
          gx[static_cast<size_t>(r) * d + j] += (gy[j] - y[j] * yg) / norm;
      }
      break;
    }
    case Op::NceLoss:
    case Op::NceProb: {
      const S go = g[0];
      const S tau = n.sattr[0];
      const S u_p = n.sattr[1];
      const S lse = n.sattr[2];
      const int N = static_cast<int>(n.sattr[3]);
      const S norm_a = n.sattr[4];
      const S norm_c = n.sattr[5];
      const S* u = n.sattr.data() + 6;
      const S* nnorm = n.sattr.data() + 6 + N;
      const int d = in_node(n.in[0]).shape[0];

      // d(loss)/du_p and d(loss)/d(lse); u_j pick up their direct term plus
      // the softmax-weighted lse term.
      S du_p, dlse;
      std::vector<S> du(static_cast<size_t>(N), S(0));
      if (n.op == Op::NceLoss) {
        const S h_pos = stable_sigmoid(u_p - lse);
        du_p = (h_pos - S(1)) * go;
        S sum_h = S(0);
        for (int j = 0; j < N; ++j) {
          const S h_j = stable_sigmoid(u[j] - lse);
          du[static_cast<size_t>(j)] = h_j * go;
          sum_h += h_j;
        }
        dlse = ((S(1) - h_pos) - sum_h) * go;
      } else {
        const S h = n.val[0];
        du_p = h * (S(1) - h) * go;
        dlse = -du_p;
      }
      for (int j = 0; j < N; ++j)
        du[static_cast<size_t>(j)] += std::exp(u[j] - lse) * dlse;

      // chain through the cosine similarities on normalized vectors
      std::vector<S> ahat(static_cast<size_t>(d)), chat(static_cast<size_t>(d));
      const S* av = vin(0).data();
      const S* cv = vin(1).data();
      const S* nv = vin(2).data();
      for (int j = 0; j < d; ++j) {
        ahat[static_cast<size_t>(j)] = av[j] / norm_a;
        chat[static_cast<size_t>(j)] = cv[j] / norm_c;
      }
      std::vector<S> g_ahat(static_cast<size_t>(d), S(0)), g_chat(static_cast<size_t>(d), S(0));
      const S gsp = du_p / tau;
      for (int j = 0; j < d; ++j) {
        g_ahat[static_cast<size_t>(j)] += gsp * chat[static_cast<size_t>(j)];
        g_chat[static_cast<size_t>(j)] += gsp * ahat[static_cast<size_t>(j)];
      }
      std::vector<S> nhat(static_cast<size_t>(d));
      const bool want_negs = wants(2);
      for (int jn = 0; jn < N; ++jn) {
        const S gsj = du[static_cast<size_t>(jn)] / tau;
        const S* nr = nv + static_cast<size_t>(jn) * d;
        const S nn = nnorm[jn];
        for (int j = 0; j < d; ++j) nhat[static_cast<size_t>(j)] = nr[j] / nn;
        for (int j = 0; j < d; ++j) g_chat[static_cast<size_t>(j)] += gsj * nhat[static_cast<size_t>(j)];
        if (want_negs) {
          S* gneg = gin(2).data() + static_cast<size_t>(jn) * d;
          // d(nhat)/d(neg): project out the radial component, then scale
          S proj = S(0);
          for (int j = 0; j < d; ++j) proj += nhat[static_cast<size_t>(j)] * (gsj * chat[static_cast<size_t>(j)]);
          for (int j = 0; j < d; ++j)
            gneg[j] += (gsj * chat[static_cast<size_t>(j)] - nhat[static_cast<size_t>(j)] * proj) / nn;
        }
      }
      if (wants(0)) {
        S* ga = gin(0).data();
        const S proj = dot_span(ahat.data(), g_ahat.data(), static_cast<size_t>(d));
        for (int j = 0; j < d; ++j)
          ga[j] += (g_ahat[static_cast<size_t>(j)] - ahat[static_cast<size_t>(j)] * proj) / norm_a;
      }
      if (wants(1)) {
        S* gc = gin(1).data();
        const S proj = dot_span(chat.data(), g_chat.data(), static_cast<size_t>(d));
        for (int j = 0; j < d; ++j)
          gc[j] += (g_chat[static_cast<size_t>(j)] - chat[static_cast<size_t>(j)] * proj) / norm_c;
      }
      break;
    }
    case Op::SoftmaxXent: {
      if (!wants(0)) break;
      const S go = g[0];
      const Shape& ls = in_node(n.in[0]).shape;
      const int N = ls[0], C = ls[1];
      const S* lv = vin(0).data();
      S* gl = gin(0).data();
      const S invn = S(1) / static_cast<S>(N);
      std::vector<S> p(static_cast<size_t>(C));
      for (int i = 0; i < N; ++i) {
        const S* row = lv + static_cast<size_t>(i) * C;
        S m = row[0];
        for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
        S acc = S(0);
        for (int j = 0; j < C; ++j) {
          p[static_cast<size_t>(j)] = std::exp(row[j] - m);
          acc += p[static_cast<size_t>(j)];
        }
        for (int j = 0; j < C; ++j) {
          S v = p[static_cast<size_t>(j)] / acc;
          if (j == n.iattr[static_cast<size_t>(i)]) v -= S(1);
          gl[static_cast<size_t>(i) * C + j] += go * v * invn;
        }
      }
      break;
    }
  }
}

// ---- finite differences --------------------------------------------------------

template <class S>
double finite_diff_check(const std::function<double(bool)>& eval,
                         std::span<Param<S>* const> params, double eps) {
  PIRL_CHECK(eps > 0.0 && eps <= 1e-2, "finite_diff_check: eps must lie in (0, 1e-2], got ", eps);
  for (auto* p : params) p->zero_grad();
  const double base = eval(true);
  PIRL_CHECK_NUMERIC(std::isfinite(base), "numerical-instability: non-finite loss in gradient check");

  std::vector<std::vector<S>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    for (S gv : p->grad)
      PIRL_CHECK_NUMERIC(std::isfinite(static_cast<double>(gv)),
                         "numerical-instability: non-finite analytic gradient for ", p->name);
    analytic.push_back(p->grad);
  }

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param<S>& p = *params[pi];
    for (size_t e = 0; e < p.value.size(); ++e) {
      const S orig = p.value[e];
      p.value[e] = orig + static_cast<S>(eps);
      const double fp = eval(false);
      p.value[e] = orig - static_cast<S>(eps);
      const double fm = eval(false);
      p.value[e] = orig;
      PIRL_CHECK_NUMERIC(std::isfinite(fp) && std::isfinite(fm),
                         "numerical-instability: non-finite perturbed loss for ", p.name);
      const double cd = (fp - fm) / (2.0 * eps);
      const double a = static_cast<double>(analytic[pi][e]);
      const double rel = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---- instantiations -------------------------------------------------------------

template struct Param<float>;
template struct Param<double>;
template class Tape<float>;
template class Tape<double>;
template struct Var<float>;
template struct Var<double>;

#define PIRL_INSTANTIATE_OPS(S)                                                        \
  template Var<S> add(Var<S>, Var<S>);                                                 \
  template Var<S> sub(Var<S>, Var<S>);                                                 \
  template Var<S> mul(Var<S>, Var<S>);                                                 \
  template Var<S> scale(Var<S>, S);                                                    \
  template Var<S> add_rowvec(Var<S>, Var<S>);                                          \
  template Var<S> matmul(Var<S>, Var<S>);                                              \
  template Var<S> relu(Var<S>);                                                        \
  template Var<S> conv2d(Var<S>, Var<S>, Var<S>, int, int);                            \
  template Var<S> avg_pool2d(Var<S>, int, int);                                        \
  template Var<S> global_avg_pool(Var<S>);                                             \
  template Var<S> gather_rows(Var<S>, const std::vector<int>&);                        \
  template Var<S> reshape(Var<S>, Shape);                                              \
  template Var<S> concat_last(const std::vector<Var<S>>&);                             \
  template Var<S> dot(Var<S>, Var<S>);                                                 \
  template Var<S> sum(Var<S>);                                                         \
  template Var<S> l2_normalize(Var<S>);                                                \
  template Var<S> cosine_similarity(Var<S>, Var<S>);                                   \
  template Var<S> nce_match_prob(Var<S>, Var<S>, Var<S>, S);                           \
  template Var<S> nce_loss(Var<S>, Var<S>, Var<S>, S);                                 \
  template Var<S> softmax_cross_entropy(Var<S>, const std::vector<int>&);              \
  template double finite_diff_check(const std::function<double(bool)>&,                \
                                    std::span<Param<S>* const>, double);

PIRL_INSTANTIATE_OPS(float)
PIRL_INSTANTIATE_OPS(double)

}  // namespace pirl
