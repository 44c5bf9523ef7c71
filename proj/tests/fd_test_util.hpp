// Shared helpers for finite-difference gradient tests.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pirl/model.hpp"
#include "pirl/rng.hpp"
#include "pirl/tensor.hpp"

namespace fdtest {

template <class S>
std::vector<S> random_input(size_t n, uint64_t seed, double scale = 1.0) {
  pirl::Rng rng(seed);
  std::vector<S> v(n);
  for (auto& x : v) x = static_cast<S>(rng.uniform(-scale, scale));
  return v;
}

template <class Builder>
double fd_max_err(std::vector<pirl::Param<double>*> params, Builder build, double eps = 1e-5) {
  auto eval = [&](bool grad) -> double {
    pirl::Tape<double> t;
    auto loss = build(t);
    if (grad) t.backward(loss);
    return loss.scalar();
  };
  return pirl::finite_diff_check<double>(eval, params, eps);
}

inline pirl::Var<double> weighted_sum(pirl::Tape<double>& t, pirl::Var<double> x, uint64_t seed) {
  pirl::Rng rng(seed);
  std::vector<double> w(x.value().size());
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  return pirl::sum(pirl::mul(x, t.constant(x.shape(), std::move(w))));
}

// Central differences are blind at ReLU kinks: when a pre-activation sits
// within the perturbation window of zero the function is not differentiable
// there and the check's precondition is violated. Returns the smallest
// |pre-activation| the trunk produces on this input so callers can select
// seeds with clearance.
inline double min_preactivation(pirl::EncoderModel<double>& model,
                                const std::vector<double>& input, pirl::Shape shape) {
  pirl::Tape<double> t;
  pirl::Var<double> h = t.constant(std::move(shape), input);
  double min_abs = 1e300;
  const int stages = model.config().stages();
  for (int s = 0; s < stages; ++s) {
    const std::string base = "trunk.stage" + std::to_string(s + 1);
    for (const char* conv : {".conv1", ".conv2"}) {
      auto* w = model.find(base + conv + ".weight");
      auto* b = model.find(base + conv + ".bias");
      h = pirl::conv2d(h, t.param(*w), t.param(*b), 1, 1);
      for (double v : h.value()) min_abs = std::min(min_abs, std::abs(v));
      h = pirl::relu(h);
    }
    h = pirl::avg_pool2d(h, 2, 2);
  }
  return min_abs;
}

// First input seed at or after `base` whose pre-activations all clear the
// kink window.
inline uint64_t pick_kink_free_seed(pirl::EncoderModel<double>& model, pirl::Shape shape,
                                    uint64_t base, double scale = 0.5,
                                    double clearance = 1e-3) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  for (uint64_t seed = base; seed < base + 1000; ++seed) {
    auto input = random_input<double>(n, seed, scale);
    if (min_preactivation(model, input, shape) > clearance) return seed;
  }
  throw std::runtime_error("no kink-free input seed found");
}

}  // namespace fdtest
