#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "fd_test_util.hpp"
#include "pirl/checkpoint.hpp"
#include "pirl/model.hpp"
#include "pirl/rng.hpp"

using namespace pirl;
using fdtest::fd_max_err;
using fdtest::random_input;
using fdtest::weighted_sum;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.stage_channels = {4, 8};
  cfg.embed_dim = 6;
  cfg.grid = 2;
  cfg.covariant_classes = 5;
  return cfg;
}

}  // namespace

TEST_CASE("trunk shapes at the default desk geometry: S=96 -> 48,24,12,6 and pooled 2x256") {
  EncoderModel<float> model(ModelConfig{}, 7);
  Tape<float> t;
  auto x = t.constant({2, 3, 96, 96}, random_input<float>(2 * 3 * 96 * 96, 1));
  auto out = model.encode_trunk(t, x);
  REQUIRE(out.stages.size() == 4);
  CHECK(out.stages[0].shape() == Shape{2, 32, 48, 48});
  CHECK(out.stages[1].shape() == Shape{2, 64, 24, 24});
  CHECK(out.stages[2].shape() == Shape{2, 128, 12, 12});
  CHECK(out.stages[3].shape() == Shape{2, 256, 6, 6});
  CHECK(out.pooled.shape() == Shape{2, 256});
}

TEST_CASE("zero input: pooled output is finite and fixed by the biases") {
  EncoderModel<double> model(tiny_config(), 3);
  Tape<double> t;
  auto x = t.constant({1, 3, 8, 8}, std::vector<double>(3 * 64, 0.0));
  auto out = model.encode_trunk(t, x);
  for (double v : out.pooled.value()) CHECK(std::isfinite(v));

  // biases are zero-initialized, so the zero image maps to the zero feature
  for (double v : out.pooled.value()) CHECK(v == 0.0);
}

TEST_CASE("duplicated batch rows produce bit-identical pooled rows") {
  EncoderModel<float> model(tiny_config(), 11);
  auto one = random_input<float>(3 * 64, 5);
  std::vector<float> two = one;
  two.insert(two.end(), one.begin(), one.end());
  Tape<float> t;
  auto out = model.encode_trunk(t, t.constant({2, 3, 8, 8}, two));
  auto v = out.pooled.value();
  const int D = model.config().trunk_dim();
  for (int j = 0; j < D; ++j) REQUIRE(v[static_cast<size_t>(j)] == v[static_cast<size_t>(D + j)]);
}

TEST_CASE("encode_trunk rejects wrong channel count") {
  EncoderModel<float> model(tiny_config(), 1);
  Tape<float> t;
  auto x = t.constant({1, 4, 8, 8}, std::vector<float>(4 * 64, 0.f));
  CHECK_THROWS_AS(model.encode_trunk(t, x), invalid_argument_error);
}

TEST_CASE("head_f: zero weights give constant rows equal to the bias") {
  EncoderModel<double> model(tiny_config(), 2);
  auto* w = model.find("head_f.weight");
  auto* b = model.find("head_f.bias");
  REQUIRE(w != nullptr);
  std::fill(w->value.begin(), w->value.end(), 0.0);
  for (size_t j = 0; j < b->value.size(); ++j) b->value[j] = 0.1 * static_cast<double>(j + 1);

  Tape<double> t;
  auto pooled = t.constant({3, 8}, random_input<double>(24, 9));
  auto y = model.head_f(t, pooled);
  REQUIRE(y.shape() == Shape{3, 6});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(y.value()[static_cast<size_t>(i * 6 + j)] == doctest::Approx(b->value[static_cast<size_t>(j)]));
}

TEST_CASE("head_f: identity-padded weights copy the first d coordinates") {
  EncoderModel<double> model(tiny_config(), 2);
  auto* w = model.find("head_f.weight");  // [D=8, d=6]
  auto* b = model.find("head_f.bias");
  std::fill(w->value.begin(), w->value.end(), 0.0);
  std::fill(b->value.begin(), b->value.end(), 0.0);
  for (int j = 0; j < 6; ++j) w->value[static_cast<size_t>(j * 6 + j)] = 1.0;

  Tape<double> t;
  auto pooled = t.constant({2, 8}, random_input<double>(16, 13));
  auto y = model.head_f(t, pooled);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(y.value()[static_cast<size_t>(i * 6 + j)] ==
            doctest::Approx(pooled.value()[static_cast<size_t>(i * 8 + j)]));
}

TEST_CASE("gradient check through head_f of the trunk") {
  EncoderModel<double> model(tiny_config(), 17);
  const uint64_t seed = fdtest::pick_kink_free_seed(model, {2, 3, 8, 8}, 23);
  auto input = random_input<double>(2 * 3 * 8 * 8, seed, 0.5);
  std::vector<Param<double>*> ps;
  for (auto* p : model.params())
    if (p->name.rfind("trunk.", 0) == 0 || p->name.rfind("head_f.", 0) == 0) ps.push_back(p);

  CHECK(fd_max_err(ps, [&](Tape<double>& t) {
          auto x = t.constant({2, 3, 8, 8}, input);
          auto out = model.encode_trunk(t, x);
          return weighted_sum(t, model.head_f(t, out.pooled), 31);
        }) < 1e-4);
}

TEST_CASE("head_g: concat width is g^2*d = 1152 at the default architecture") {
  EncoderModel<float> model(ModelConfig{}, 5);
  auto* gc = model.find("head_g.final.weight");
  REQUIRE(gc != nullptr);
  CHECK(gc->shape == Shape{1152, 128});
}

TEST_CASE("head_g: equal column blocks in the final projection erase the shuffle order") {
  auto cfg = tiny_config();  // g=2 -> 4 slots, d=6, concat width 24
  EncoderModel<double> model(cfg, 19);
  auto* gc_w = model.find("head_g.final.weight");  // [24, 6]
  auto* gc_b = model.find("head_g.final.bias");
  Rng rng(3);
  // identical 6x6 block for every slot; bias fixed
  std::vector<double> block(36);
  for (auto& v : block) v = rng.uniform(-1.0, 1.0);
  for (int slot = 0; slot < 4; ++slot)
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) gc_w->value[static_cast<size_t>((slot * 6 + r) * 6 + c)] = block[static_cast<size_t>(r * 6 + c)];
  for (auto& v : gc_b->value) v = 0.25;

  auto feats = random_input<double>(2 * 4 * 8, 77);
  std::vector<double> out1, out2;
  for (uint64_t shuffle_seed : {111ULL, 999ULL}) {
    Tape<double> t;
    auto pooled = t.constant({8, 8}, feats);
    auto y = model.head_g(t, pooled, 2, shuffle_seed, true);
    REQUIRE(y.shape() == Shape{2, 6});
    if (shuffle_seed == 111ULL)
      out1.assign(y.value().begin(), y.value().end());
    else
      out2.assign(y.value().begin(), y.value().end());
  }
  for (size_t i = 0; i < out1.size(); ++i) CHECK(out1[i] == doctest::Approx(out2[i]).epsilon(1e-12));
}

TEST_CASE("gradient check through the full patch pipeline (patches -> head_g)") {
  auto cfg = tiny_config();
  EncoderModel<double> model(cfg, 29);
  const int slots = cfg.grid * cfg.grid;
  const Shape pshape{2 * slots, 3, 4, 4};
  const uint64_t seed = fdtest::pick_kink_free_seed(model, pshape, 41);
  auto patches = random_input<double>(static_cast<size_t>(2) * slots * 3 * 4 * 4, seed, 0.5);
  std::vector<Param<double>*> ps;
  for (auto* p : model.params())
    if (p->name.rfind("trunk.", 0) == 0 || p->name.rfind("head_g.", 0) == 0) ps.push_back(p);

  CHECK(fd_max_err(ps, [&](Tape<double>& t) {
          auto x = t.constant({2 * slots, 3, 4, 4}, patches);
          auto out = model.encode_trunk(t, x);
          auto g = model.head_g(t, out.pooled, 2, 55, true);
          return weighted_sum(t, g, 43);
        }) < 1e-4);
}

TEST_CASE("covariant head: width, uniform-logit chance loss, separable-logit loss") {
  auto cfg = tiny_config();
  EncoderModel<double> model(cfg, 31);
  auto* w = model.find("covariant.weight");
  auto* b = model.find("covariant.bias");
  CHECK(w->shape == Shape{cfg.grid * cfg.grid * cfg.embed_dim, 5});

  std::fill(w->value.begin(), w->value.end(), 0.0);
  std::fill(b->value.begin(), b->value.end(), 0.0);
  const int slots = cfg.grid * cfg.grid;
  auto feats = random_input<double>(static_cast<size_t>(3) * slots * 8, 47);
  {
    Tape<double> t;
    auto logits = model.covariant_logits(t, t.constant({3 * slots, 8}, feats), 3);
    REQUIRE(logits.shape() == Shape{3, 5});
    auto loss = softmax_cross_entropy(logits, {0, 3, 4});
    CHECK(loss.scalar() == doctest::Approx(std::log(5.0)).epsilon(1e-9));
  }
  {
    // a large margin on the true class drives the loss to ~0
    std::vector<int> labels{2, 0, 1};
    std::fill(b->value.begin(), b->value.end(), 0.0);
    Tape<double> t;
    std::vector<double> raw(15, 0.0);
    for (int i = 0; i < 3; ++i) raw[static_cast<size_t>(i * 5 + labels[static_cast<size_t>(i)])] = 50.0;
    auto loss = softmax_cross_entropy(t.constant({3, 5}, raw), labels);
    CHECK(loss.scalar() < 1e-6);
  }
}

TEST_CASE("parameter shapes are a pure function of the config; classes touch only the head") {
  auto cfg_a = tiny_config();
  auto cfg_b = tiny_config();
  cfg_b.covariant_classes = 17;
  EncoderModel<float> a(cfg_a, 5), b(cfg_b, 5);
  auto pa = a.params(), pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->name == pb[i]->name);
    if (pa[i]->name.rfind("covariant.", 0) == 0)
      CHECK(pa[i]->shape != pb[i]->shape);
    else
      CHECK(pa[i]->shape == pb[i]->shape);
  }
  // registry names are unique
  std::set<std::string> names;
  for (auto* p : pa) names.insert(p->name);
  CHECK(names.size() == pa.size());
}

TEST_CASE("checkpoint: save -> load -> forward is bit-identical") {
  auto cfg = tiny_config();
  EncoderModel<float> model(cfg, 123);
  for (auto* p : model.params())
    for (auto& m : p->momentum) m = 0.5f;

  auto ckpt = make_model_checkpoint(model, "{\"note\":\"test\"}", true);
  const std::string path = "model_roundtrip.ckpt";
  ckpt.save(path);

  auto loaded = Checkpoint::load(path);
  CHECK(loaded.config_echo == "{\"note\":\"test\"}");
  EncoderModel<float> restored(cfg, 999);  // different init, then overwritten
  load_model_params(loaded, restored);

  auto input = random_input<float>(1 * 3 * 8 * 8, 9);
  std::vector<float> out_a, out_b;
  {
    Tape<float> t;
    auto y = model.head_f(t, model.encode_trunk(t, t.constant({1, 3, 8, 8}, input)).pooled);
    out_a.assign(y.value().begin(), y.value().end());
  }
  {
    Tape<float> t;
    auto y = restored.head_f(t, restored.encode_trunk(t, t.constant({1, 3, 8, 8}, input)).pooled);
    out_b.assign(y.value().begin(), y.value().end());
  }
  REQUIRE(out_a.size() == out_b.size());
  for (size_t i = 0; i < out_a.size(); ++i) REQUIRE(out_a[i] == out_b[i]);
  for (auto* p : restored.params())
    for (float m : p->momentum) REQUIRE(m == 0.5f);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: architecture mismatch is rejected") {
  auto cfg = tiny_config();
  EncoderModel<float> model(cfg, 1);
  auto ckpt = make_model_checkpoint(model, "", false);
  auto other_cfg = cfg;
  other_cfg.embed_dim = 7;
  EncoderModel<float> other(other_cfg, 1);
  CHECK_THROWS_AS(load_model_params(ckpt, other), invalid_argument_error);
}
