#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pirl/model.hpp"
#include "pirl/tensor.hpp"

namespace pirl {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// Checkpoint container. On disk: magic "PIRLCKPT", format version u32, the
/// run config echo, a manifest of (name, dtype, shape) entries, then raw
/// little-endian float buffers in manifest order.
struct Checkpoint {
  uint32_t version = 1;
  std::string config_echo;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

/// Model parameters under their registry names plus SGD momentum buffers
/// under "momentum/<name>". Extra tensors (e.g. the memory bank) can be
/// appended by the caller before saving.
Checkpoint make_model_checkpoint(EncoderModel<float>& model, const std::string& config_echo,
                                 bool include_momentum);

/// Restores parameter values (and momentum buffers when present) into a model
/// built with a matching architecture; rejects name or shape mismatches.
void load_model_params(const Checkpoint& ckpt, EncoderModel<float>& model);

}  // namespace pirl
