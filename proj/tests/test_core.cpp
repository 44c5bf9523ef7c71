// Tensor engine tests: op semantics against brute-force oracles and analytic
// gradients against central finite differences (64-bit mode).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "pirl/rng.hpp"
#include "pirl/tensor.hpp"

using pirl::Param;
using pirl::Rng;
using pirl::Shape;
using pirl::Tape;
using pirl::Var;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

Param<double> make_param(const std::string& name, Shape shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
  Param<double> p(name, std::move(shape));
  for (auto& x : p.value) x = rng.uniform(lo, hi);
  return p;
}

template <class Builder>
double fd_max_err(std::vector<Param<double>*> params, Builder build, double eps = 1e-5) {
  auto eval = [&](bool grad) -> double {
    Tape<double> t;
    auto loss = build(t);
    if (grad) t.backward(loss);
    return loss.scalar();
  };
  return pirl::finite_diff_check<double>(eval, params, eps);
}

// Scalarizes a tensor with fixed pseudo-random weights so every output element
// gets a distinct cotangent.
Var<double> weighted_sum(Tape<double>& t, Var<double> x, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(x.value().size());
  for (auto& v : w) v = rng.uniform(-2.0, 2.0);
  auto wv = t.constant(x.shape(), std::move(w));
  return pirl::sum(pirl::mul(x, wv));
}

// Independent 7-loop direct convolution oracle.
std::vector<double> naive_conv2d(const std::vector<double>& in, int N, int C, int H, int W,
                                 const std::vector<double>& ker, int K, int KH, int KW,
                                 const std::vector<double>& bias, int stride, int pad) {
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<double> out(static_cast<size_t>(N) * K * OH * OW, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = bias[static_cast<size_t>(k)];
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * stride - pad + kh;
                const int iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += in[((static_cast<size_t>(n) * C + c) * H + ih) * W + iw] *
                       ker[((static_cast<size_t>(k) * C + c) * KH + kh) * KW + kw];
              }
          out[((static_cast<size_t>(n) * K + k) * OH + oh) * OW + ow] = acc;
        }
  return out;
}

constexpr int kSeeds = 20;

}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tape<double> t;
  Rng rng(1);
  auto x = t.constant({1, 1, 4, 4}, random_vec(rng, 16));
  auto k = t.constant({1, 1, 1, 1}, {1.0});
  auto b = t.constant({1}, {0.0});
  auto y = pirl::conv2d(x, k, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 4, 4});
  for (size_t i = 0; i < 16; ++i) CHECK(y.value()[i] == x.value()[i]);
}

TEST_CASE("conv2d all-ones 3x3 sums to 9") {
  Tape<double> t;
  auto x = t.constant({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  auto k = t.constant({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  auto b = t.constant({1}, {0.0});
  auto y = pirl::conv2d(x, k, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.value()[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d matches the 7-loop oracle on strided padded input") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed + 100);
    auto in = random_vec(rng, 2 * 3 * 8 * 8);
    auto ker = random_vec(rng, 4 * 3 * 3 * 3);
    auto bias = random_vec(rng, 4);
    Tape<double> t;
    auto y = pirl::conv2d(t.constant({2, 3, 8, 8}, in), t.constant({4, 3, 3, 3}, ker),
                          t.constant({4}, bias), 2, 1);
    REQUIRE(y.shape() == Shape{2, 4, 4, 4});
    auto oracle = naive_conv2d(in, 2, 3, 8, 8, ker, 4, 3, 3, bias, 2, 1);
    for (size_t i = 0; i < oracle.size(); ++i)
      CHECK(y.value()[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic naming both") {
  Tape<double> t;
  auto x = t.constant({1, 3, 4, 4}, std::vector<double>(48, 0.0));
  auto k = t.constant({2, 2, 3, 3}, std::vector<double>(36, 0.0));
  auto b = t.constant({2}, {0.0, 0.0});
  try {
    pirl::conv2d(x, k, b, 1, 0);
    FAIL("expected shape mismatch");
  } catch (const pirl::invalid_argument_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("[1,3,4,4]") != std::string::npos);
    CHECK(msg.find("[2,2,3,3]") != std::string::npos);
  }
}

TEST_CASE("conv2d is pure: identical inputs give bit-identical outputs") {
  Rng rng(7);
  auto in = random_vec(rng, 2 * 3 * 8 * 8);
  auto ker = random_vec(rng, 4 * 3 * 3 * 3);
  auto bias = random_vec(rng, 4);
  std::vector<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    Tape<double> t;
    auto y = pirl::conv2d(t.constant({2, 3, 8, 8}, in), t.constant({4, 3, 3, 3}, ker),
                          t.constant({4}, bias), 1, 1);
    if (rep == 0) {
      first.assign(y.value().begin(), y.value().end());
    } else {
      REQUIRE(first.size() == y.value().size());
      CHECK(std::memcmp(first.data(), y.value().data(), first.size() * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("l2_normalize basics") {
  Tape<double> t;
  auto v = t.constant({2}, {3.0, 4.0});
  auto y = pirl::l2_normalize(v);
  CHECK(y.value()[0] == doctest::Approx(0.6));
  CHECK(y.value()[1] == doctest::Approx(0.8));

  auto u = t.constant({3}, {0.0, 1.0, 0.0});
  auto yu = pirl::l2_normalize(u);
  for (int i = 0; i < 3; ++i) CHECK(yu.value()[i] == doctest::Approx(u.value()[i]));

  auto z = t.constant({2}, {1e-13, 0.0});
  CHECK_THROWS_AS(pirl::l2_normalize(z), pirl::numeric_error);
}

TEST_CASE("l2_normalize output has unit norm and preserved direction") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed + 30);
    Tape<double> t;
    auto v = random_vec(rng, 16, -3.0, 3.0);
    auto y = pirl::l2_normalize(t.constant({16}, v));
    double nrm = 0.0, cross = 0.0, vn = 0.0;
    for (size_t i = 0; i < 16; ++i) {
      nrm += y.value()[i] * y.value()[i];
      cross += y.value()[i] * v[i];
      vn += v[i] * v[i];
    }
    CHECK(std::abs(std::sqrt(nrm) - 1.0) < 1e-6);
    CHECK(cross / std::sqrt(vn) == doctest::Approx(1.0));  // parallel, not flipped
  }
}

TEST_CASE("backward: quadratic, constant loss, additivity, non-scalar rejection") {
  Param<double> x("x", {3});
  x.value = {1.0, -2.0, 3.0};

  {
    Tape<double> t;
    auto xv = t.param(x);
    auto loss = pirl::sum(pirl::mul(xv, xv));
    t.backward(loss);
    CHECK(x.grad[0] == doctest::Approx(2.0));
    CHECK(x.grad[1] == doctest::Approx(-4.0));
    CHECK(x.grad[2] == doctest::Approx(6.0));

    // second backward without reset doubles every gradient
    t.backward(loss);
    CHECK(x.grad[0] == doctest::Approx(4.0));
    CHECK(x.grad[1] == doctest::Approx(-8.0));
    CHECK(x.grad[2] == doctest::Approx(12.0));
  }

  {
    x.zero_grad();
    Tape<double> t;
    (void)t.param(x);
    auto c = t.constant({}, {5.0});
    auto loss = pirl::sum(c);
    t.backward(loss);
    for (double g : x.grad) CHECK(g == 0.0);
  }

  {
    Tape<double> t;
    auto xv = t.param(x);
    CHECK_THROWS_AS(t.backward(xv), pirl::invalid_argument_error);
  }
}

TEST_CASE("finite_diff_check: bilinear dot is exact, eps validated") {
  Rng rng(5);
  Param<double> a = make_param("a", {9}, rng);
  Param<double> b = make_param("b", {9}, rng);
  std::vector<Param<double>*> ps{&a, &b};
  auto build = [&](Tape<double>& t) { return pirl::dot(t.param(a), t.param(b)); };
  CHECK(fd_max_err(ps, build) < 1e-8);

  auto eval = [&](bool) { return 0.0; };
  CHECK_THROWS_AS(pirl::finite_diff_check<double>(eval, std::span<Param<double>* const>(ps.data(), 2), 0.0),
                  pirl::invalid_argument_error);
}

TEST_CASE("gradient suite: elementwise and linear ops") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed * 37 + 11);
    Param<double> a = make_param("a", {3, 4}, rng);
    Param<double> b = make_param("b", {3, 4}, rng);
    Param<double> m1 = make_param("m1", {3, 4}, rng);
    Param<double> m2 = make_param("m2", {4, 5}, rng);
    Param<double> rv = make_param("rv", {4}, rng);

    CHECK(fd_max_err({&a, &b}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::add(t.param(a), t.param(b)), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&a, &b}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::sub(t.param(a), t.param(b)), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&a, &b}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::mul(t.param(a), t.param(b)), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&a}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::scale(t.param(a), 1.7), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&m1, &m2}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::matmul(t.param(m1), t.param(m2)), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&a, &rv}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::add_rowvec(t.param(a), t.param(rv)), seed);
          }) < 1e-4);
  }
}

TEST_CASE("gradient suite: relu away from the kink") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed * 13 + 3);
    Param<double> x("x", {4, 5});
    for (auto& v : x.value) {
      double u = rng.uniform(-1.0, 1.0);
      v = u + (u >= 0 ? 0.2 : -0.2);  // keep |x| > 0.2 >> eps
    }
    CHECK(fd_max_err({&x}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::relu(t.param(x)), seed);
          }) < 1e-4);
  }
}

TEST_CASE("gradient suite: conv2d and pooling") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed * 101 + 17);
    Param<double> x = make_param("x", {2, 3, 5, 5}, rng);
    Param<double> k = make_param("k", {2, 3, 3, 3}, rng);
    Param<double> b = make_param("b", {2}, rng);

    CHECK(fd_max_err({&x, &k, &b}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::conv2d(t.param(x), t.param(k), t.param(b), 1, 1), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&x, &k, &b}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::conv2d(t.param(x), t.param(k), t.param(b), 2, 1), seed);
          }) < 1e-4);

    Param<double> p = make_param("p", {2, 2, 6, 6}, rng);
    CHECK(fd_max_err({&p}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::avg_pool2d(t.param(p), 2, 2), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&p}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::global_avg_pool(t.param(p)), seed);
          }) < 1e-4);
  }
}

TEST_CASE("gradient suite: gather, reshape, concat, dot, sum, normalize, xent") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed * 7 + 29);
    Param<double> x = make_param("x", {5, 4}, rng);
    Param<double> y = make_param("y", {5, 3}, rng);
    Param<double> v1 = make_param("v1", {7}, rng);
    Param<double> v2 = make_param("v2", {7}, rng);
    Param<double> logits = make_param("logits", {4, 7}, rng, -2.0, 2.0);

    std::vector<int> idx{0, 2, 2, 4, 1};
    CHECK(fd_max_err({&x}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::gather_rows(t.param(x), idx), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&x}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::reshape(t.param(x), {2, 10}), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&x, &y}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::concat_last<double>({t.param(x), t.param(y)}), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&v1, &v2}, [&](Tape<double>& t) {
            return pirl::dot(t.param(v1), t.param(v2));
          }) < 1e-4);
    CHECK(fd_max_err({&x}, [&](Tape<double>& t) { return pirl::sum(t.param(x)); }) < 1e-4);
    CHECK(fd_max_err({&x}, [&](Tape<double>& t) {
            return weighted_sum(t, pirl::l2_normalize(t.param(x)), seed);
          }) < 1e-4);
    CHECK(fd_max_err({&v1, &v2}, [&](Tape<double>& t) {
            return pirl::cosine_similarity(t.param(v1), t.param(v2));
          }) < 1e-4);

    std::vector<int> labels{3, 0, 6, 2};
    CHECK(fd_max_err({&logits}, [&](Tape<double>& t) {
            return pirl::softmax_cross_entropy(t.param(logits), labels);
          }) < 1e-4);
  }
}

TEST_CASE("gradient of sum(l2_normalize(v)) on a 128-d vector") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed + 1000);
    Param<double> v = make_param("v", {128}, rng);
    CHECK(fd_max_err({&v}, [&](Tape<double>& t) {
            return pirl::sum(pirl::l2_normalize(t.param(v)));
          }) < 1e-4);
  }
}

// Embeddings are drawn as a shared base plus noise so cosine similarities stay
// within a few tau of each other; in the saturated tail of the estimator the
// true gradients drop below what central differences at eps=1e-5 can resolve.
Param<double> clustered_embedding(const std::string& name, Shape shape, Rng& rng,
                                  const std::vector<double>& base) {
  Param<double> p(name, std::move(shape));
  for (size_t i = 0; i < p.value.size(); ++i)
    p.value[i] = base[i % base.size()] + 0.25 * rng.uniform(-1.0, 1.0);
  return p;
}

TEST_CASE("gradient suite: nce_loss and nce_match_prob at tau=0.07") {
  for (uint64_t seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed * 31 + 2);
    auto base = random_vec(rng, 8);
    Param<double> anchor = clustered_embedding("anchor", {8}, rng, base);
    Param<double> cand = clustered_embedding("cand", {8}, rng, base);
    Param<double> negs = clustered_embedding("negs", {4, 8}, rng, base);

    CHECK(fd_max_err({&anchor, &cand, &negs}, [&](Tape<double>& t) {
            return pirl::nce_loss(t.param(anchor), t.param(cand), t.param(negs), 0.07);
          }) < 1e-4);
    CHECK(fd_max_err({&anchor, &cand, &negs}, [&](Tape<double>& t) {
            return pirl::nce_match_prob(t.param(anchor), t.param(cand), t.param(negs), 0.07);
          }) < 1e-4);
  }
}

TEST_CASE("cosine_similarity endpoint values") {
  Tape<double> t;
  auto v = t.constant({3}, {1.0, 2.0, -1.0});
  auto mv = t.constant({3}, {-1.0, -2.0, 1.0});
  auto w = t.constant({3}, {2.0, -1.0, 0.0});
  CHECK(pirl::cosine_similarity(v, v).scalar() == doctest::Approx(1.0));
  CHECK(pirl::cosine_similarity(v, mv).scalar() == doctest::Approx(-1.0));
  CHECK(pirl::cosine_similarity(v, w).scalar() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("non-finite inputs abort with a diagnostic") {
  Tape<double> t;
  CHECK_THROWS_AS(t.constant({2}, {1.0, std::numeric_limits<double>::infinity()}),
                  pirl::numeric_error);
}

TEST_CASE("float32 mode runs the same graph") {
  Tape<float> t;
  auto x = t.constant({2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto y = pirl::matmul(x, x);
  CHECK(y.value()[0] == doctest::Approx(7.f));
  CHECK(y.value()[3] == doctest::Approx(22.f));
}
