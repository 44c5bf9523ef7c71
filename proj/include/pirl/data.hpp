#pragma once

#include <string>
#include <vector>

#include "pirl/image.hpp"

namespace pirl {

/// An ordered image collection. The index order is the memory-bank row order
/// and never changes after load; shuffles permute iteration order only.
struct Dataset {
  std::vector<ImageU8> images;
  std::string source;

  int size() const { return static_cast<int>(images.size()); }
  bool labeled() const;
  std::vector<int> labels() const;
  Dataset slice(int begin, int count) const;
};

/// Standard CIFAR-10 binary batches: records of 1 label byte + 3072 pixel
/// bytes (channel-planar R,G,B, row-major 32x32).
struct CifarData {
  Dataset train;
  Dataset test;
};

/// Loads data_batch_1..5.bin and test_batch.bin from a directory.
CifarData load_cifar10(const std::string& dir);

/// Loads one binary batch file; rejects truncated files naming the offset.
std::vector<ImageU8> load_cifar_batch_file(const std::string& path);

/// Writes images in the same binary format (for synthetic-data round trips).
void save_cifar_batch_file(const std::vector<ImageU8>& images, const std::string& path);

/// Procedural 32x32 dataset: colored geometric shapes over textured
/// backgrounds, 10 shape classes, class-banded hues, balanced up to rounding.
/// Integer-only generation, so identical across runs and platforms.
Dataset synth_dataset(int n, uint64_t seed);

/// Per-channel mean/stdev over [0,1]-scaled pixels of the whole dataset.
ChannelStats compute_channel_stats(const Dataset& data);

/// FNV-1a over all pixel bytes and labels; used by purity checks.
uint64_t dataset_hash(const Dataset& data);

}  // namespace pirl
