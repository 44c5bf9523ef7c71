#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pirl/tensor.hpp"

namespace pirl {

/// Architecture description. The parameter set is a pure function of this
/// config; the covariant class count affects only the covariant head.
struct ModelConfig {
  std::vector<int> stage_channels{32, 64, 128, 256};
  int in_channels = 3;
  int embed_dim = 128;
  int grid = 3;
  int covariant_classes = 100;

  int trunk_dim() const { return stage_channels.back(); }
  int stages() const { return static_cast<int>(stage_channels.size()); }
  void validate() const;
};

/// Plain convolutional encoder: per stage conv3x3 -> ReLU -> conv3x3 -> ReLU
/// -> 2x average down-pool, global average pool to the trunk feature, plus
/// projection heads:
///   head_f      whole image, trunk_dim -> embed_dim
///   head_g      patch set: shared per-patch projection, seeded-random concat
///               order over the g^2 slots, then (g^2 * d) -> d
///   head_g_rot  whole transformed image, trunk_dim -> embed_dim
///   covariant   per-patch projections concatenated in sequence order,
///               (g^2 * d) -> covariant_classes logits
template <class S>
class EncoderModel {
public:
  EncoderModel(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  /// Registry in a fixed order with unique, stable names.
  std::vector<Param<S>*> params();
  std::vector<const Param<S>*> params() const;
  Param<S>* find(std::string_view name);

  struct TrunkOut {
    std::vector<Var<S>> stages;  // post-pool output of every stage
    Var<S> pooled;               // [N, trunk_dim]
  };

  /// x: [N, in_channels, H, W]; H and W must survive stages() halvings.
  TrunkOut encode_trunk(Tape<S>& t, Var<S> x);

  /// pooled: [N, D] -> [N, d]
  Var<S> head_f(Tape<S>& t, Var<S> pooled);

  /// patch_pooled: [N*g^2, D] in item-major slot order -> [N, d].
  /// `shuffle` draws one concat order per call from shuffle_seed; evaluation
  /// uses the identity order.
  Var<S> head_g(Tape<S>& t, Var<S> patch_pooled, int batch, uint64_t shuffle_seed, bool shuffle);

  /// pooled: [N, D] -> [N, d]; single linear layer for whole-image transforms.
  Var<S> head_g_rot(Tape<S>& t, Var<S> pooled);

  /// patch_pooled: [N*g^2, D] -> [N, covariant_classes]; the concat order is
  /// the patch sequence order so the logits can depend on the permutation.
  Var<S> covariant_logits(Tape<S>& t, Var<S> patch_pooled, int batch);

private:
  struct ConvLayer {
    Param<S> w, b;
  };
  struct Stage {
    ConvLayer c1, c2;
  };

  Var<S> linear(Tape<S>& t, Var<S> x, Param<S>& w, Param<S>& b);
  Var<S> patch_projections(Tape<S>& t, Var<S> patch_pooled);

  ModelConfig cfg_;
  std::vector<Stage> stages_;
  Param<S> f_w_, f_b_;
  Param<S> gp_w_, gp_b_;
  Param<S> gc_w_, gc_b_;
  Param<S> gr_w_, gr_b_;
  Param<S> cov_w_, cov_b_;
};

extern template class EncoderModel<float>;
extern template class EncoderModel<double>;

}  // namespace pirl
