#include "pirl/model.hpp"

#include <cmath>
#include <numeric>

#include "pirl/rng.hpp"

namespace pirl {

void ModelConfig::validate() const {
  PIRL_CHECK(!stage_channels.empty() && stage_channels.size() <= 8,
             "stage channel plan must have 1..8 entries");
  for (int c : stage_channels) PIRL_CHECK(c >= 1, "stage channels must be positive");
  PIRL_CHECK(in_channels >= 1, "in_channels must be positive");
  PIRL_CHECK(embed_dim >= 1, "embed_dim must be positive");
  PIRL_CHECK(grid >= 1, "grid must be positive");
  PIRL_CHECK(covariant_classes >= 2, "covariant_classes must be >= 2");
}

namespace {

template <class S>
void kaiming_init(Param<S>& p, int fan_in, uint64_t seed) {
  Rng rng(seed);
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : p.value) v = static_cast<S>(rng.gaussian() * std);
}

}  // namespace

template <class S>
EncoderModel<S>::EncoderModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int D = cfg_.trunk_dim();
  const int d = cfg_.embed_dim;
  const int slots = cfg_.grid * cfg_.grid;

  int in_c = cfg_.in_channels;
  uint64_t pi = 0;
  auto next_seed = [&] { return derive_seed(seed, "init", pi++); };

  for (int s = 0; s < cfg_.stages(); ++s) {
    const int out_c = cfg_.stage_channels[static_cast<size_t>(s)];
    Stage stage;
    const std::string base = "trunk.stage" + std::to_string(s + 1);
    stage.c1.w = Param<S>(base + ".conv1.weight", {out_c, in_c, 3, 3});
    stage.c1.b = Param<S>(base + ".conv1.bias", {out_c});
    kaiming_init(stage.c1.w, in_c * 9, next_seed());
    stage.c2.w = Param<S>(base + ".conv2.weight", {out_c, out_c, 3, 3});
    stage.c2.b = Param<S>(base + ".conv2.bias", {out_c});
    kaiming_init(stage.c2.w, out_c * 9, next_seed());
    stages_.push_back(std::move(stage));
    in_c = out_c;
  }

  f_w_ = Param<S>("head_f.weight", {D, d});
  f_b_ = Param<S>("head_f.bias", {d});
  kaiming_init(f_w_, D, next_seed());

  gp_w_ = Param<S>("head_g.patch.weight", {D, d});
  gp_b_ = Param<S>("head_g.patch.bias", {d});
  kaiming_init(gp_w_, D, next_seed());

  gc_w_ = Param<S>("head_g.final.weight", {slots * d, d});
  gc_b_ = Param<S>("head_g.final.bias", {d});
  kaiming_init(gc_w_, slots * d, next_seed());

  gr_w_ = Param<S>("head_g_rot.weight", {D, d});
  gr_b_ = Param<S>("head_g_rot.bias", {d});
  kaiming_init(gr_w_, D, next_seed());

  cov_w_ = Param<S>("covariant.weight", {slots * d, cfg_.covariant_classes});
  cov_b_ = Param<S>("covariant.bias", {cfg_.covariant_classes});
  kaiming_init(cov_w_, slots * d, next_seed());
}

template <class S>
std::vector<Param<S>*> EncoderModel<S>::params() {
  std::vector<Param<S>*> out;
  for (auto& st : stages_) {
    out.push_back(&st.c1.w);
    out.push_back(&st.c1.b);
    out.push_back(&st.c2.w);
    out.push_back(&st.c2.b);
  }
  for (Param<S>* p : {&f_w_, &f_b_, &gp_w_, &gp_b_, &gc_w_, &gc_b_, &gr_w_, &gr_b_, &cov_w_,
                      &cov_b_})
    out.push_back(p);
  return out;
}

template <class S>
std::vector<const Param<S>*> EncoderModel<S>::params() const {
  auto mut = const_cast<EncoderModel<S>*>(this)->params();
  return {mut.begin(), mut.end()};
}

template <class S>
Param<S>* EncoderModel<S>::find(std::string_view name) {
  for (auto* p : params())
    if (p->name == name) return p;
  return nullptr;
}

template <class S>
Var<S> EncoderModel<S>::linear(Tape<S>& t, Var<S> x, Param<S>& w, Param<S>& b) {
  return add_rowvec(matmul(x, t.param(w)), t.param(b));
}

template <class S>
typename EncoderModel<S>::TrunkOut EncoderModel<S>::encode_trunk(Tape<S>& t, Var<S> x) {
  const Shape& xs = x.shape();
  PIRL_CHECK(xs.size() == 4, "encode_trunk: input must be [N,C,H,W], got ", shape_str(xs));
  PIRL_CHECK(xs[1] == cfg_.in_channels, "encode_trunk: expected ", cfg_.in_channels,
             " channels, got input ", shape_str(xs));
  const int min_side = 1 << cfg_.stages();
  PIRL_CHECK(xs[2] >= min_side && xs[3] >= min_side, "encode_trunk: spatial extent of ",
             shape_str(xs), " cannot survive ", cfg_.stages(), " halvings");

  TrunkOut out;
  Var<S> h = x;
  for (auto& st : stages_) {
    h = relu(conv2d(h, t.param(st.c1.w), t.param(st.c1.b), 1, 1));
    h = relu(conv2d(h, t.param(st.c2.w), t.param(st.c2.b), 1, 1));
    h = avg_pool2d(h, 2, 2);
    out.stages.push_back(h);
  }
  out.pooled = global_avg_pool(h);
  return out;
}

template <class S>
Var<S> EncoderModel<S>::head_f(Tape<S>& t, Var<S> pooled) {
  PIRL_CHECK(pooled.shape().size() == 2 && pooled.shape()[1] == cfg_.trunk_dim(),
             "head_f: expected [N,", cfg_.trunk_dim(), "], got ", shape_str(pooled.shape()));
  return linear(t, pooled, f_w_, f_b_);
}

template <class S>
Var<S> EncoderModel<S>::patch_projections(Tape<S>& t, Var<S> patch_pooled) {
  PIRL_CHECK(patch_pooled.shape().size() == 2 && patch_pooled.shape()[1] == cfg_.trunk_dim(),
             "patch features must be [N*g^2,", cfg_.trunk_dim(), "], got ",
             shape_str(patch_pooled.shape()));
  return linear(t, patch_pooled, gp_w_, gp_b_);
}

template <class S>
Var<S> EncoderModel<S>::head_g(Tape<S>& t, Var<S> patch_pooled, int batch, uint64_t shuffle_seed,
                               bool shuffle) {
  const int slots = cfg_.grid * cfg_.grid;
  PIRL_CHECK(patch_pooled.shape()[0] == batch * slots, "head_g: expected ", batch * slots,
             " patch rows (", batch, " items x ", slots, " patches), got ",
             shape_str(patch_pooled.shape()));
  Var<S> proj = patch_projections(t, patch_pooled);  // [N*g^2, d]

  std::vector<int> order(static_cast<size_t>(slots));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(derive_seed(shuffle_seed, "head-g-order"));
    for (int i = slots - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)], order[rng.below(static_cast<uint64_t>(i) + 1)]);
  }
  std::vector<int> idx(static_cast<size_t>(batch) * slots);
  for (int i = 0; i < batch; ++i)
    for (int k = 0; k < slots; ++k)
      idx[static_cast<size_t>(i) * slots + k] = i * slots + order[static_cast<size_t>(k)];

  Var<S> shuffled = gather_rows(proj, idx);
  Var<S> flat = reshape(shuffled, {batch, slots * cfg_.embed_dim});
  return linear(t, flat, gc_w_, gc_b_);
}

template <class S>
Var<S> EncoderModel<S>::head_g_rot(Tape<S>& t, Var<S> pooled) {
  PIRL_CHECK(pooled.shape().size() == 2 && pooled.shape()[1] == cfg_.trunk_dim(),
             "head_g_rot: expected [N,", cfg_.trunk_dim(), "], got ", shape_str(pooled.shape()));
  return linear(t, pooled, gr_w_, gr_b_);
}

template <class S>
Var<S> EncoderModel<S>::covariant_logits(Tape<S>& t, Var<S> patch_pooled, int batch) {
  const int slots = cfg_.grid * cfg_.grid;
  PIRL_CHECK(patch_pooled.shape()[0] == batch * slots, "covariant_logits: expected ",
             batch * slots, " patch rows, got ", shape_str(patch_pooled.shape()));
  Var<S> proj = patch_projections(t, patch_pooled);
  Var<S> flat = reshape(proj, {batch, slots * cfg_.embed_dim});
  return linear(t, flat, cov_w_, cov_b_);
}

template class EncoderModel<float>;
template class EncoderModel<double>;

}  // namespace pirl
