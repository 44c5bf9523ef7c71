#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pirl/image.hpp"
#include "pirl/rng.hpp"

namespace pirl {

/// Stochastic augmentation parameters. A crop bound of 1.0 disables cropping,
/// a flip probability of 0 disables flipping and zero jitter ranges disable
/// the photometric stage, so the all-off configuration is a deterministic
/// resize.
struct AugmentConfig {
  double crop_area_min = 0.6;
  double flip_prob = 0.5;
  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;
  double jitter_hue = 0.1;

  void validate() const;
};

/// Ordered collection of patch permutations defining the jigsaw transform
/// family. Generated greedily: starting from a seeded random permutation,
/// each addition picks the candidate (from a seeded sample pool) that
/// maximizes the minimum Hamming distance to the already-chosen set.
struct PermutationSet {
  int grid = 3;
  int64_t seed = 0;
  std::vector<std::vector<int>> perms;

  int slots() const { return grid * grid; }
  int size() const { return static_cast<int>(perms.size()); }

  /// Smallest pairwise Hamming distance in the set (0 or 1 perms -> slots()).
  int min_pairwise_hamming() const;

  void save(const std::string& path) const;
  static PermutationSet load(const std::string& path);
};

/// Rejects n > (g^2)! as "set-too-large"; deterministic in (g, n, seed).
PermutationSet generate_permutation_set(int g, int64_t n, int64_t seed);

/// (g^2)! with saturation at 10^18 for large grids.
int64_t permutation_space_size(int g);

/// The g^2 patches of a jigsaw-transformed image, values in [0,1],
/// each patch stored [3][p][p], patches concatenated in slot order.
struct PatchSet {
  int grid = 3;
  int patch = 0;
  int perm_id = -1;
  std::vector<float> data;

  int count() const { return grid * grid; }
  float* patch_data(int k) { return data.data() + static_cast<size_t>(k) * 3 * patch * patch; }
  const float* patch_data(int k) const {
    return data.data() + static_cast<size_t>(k) * 3 * patch * patch;
  }
};

/// Jigsaw working geometry: crop is resized to image_size, divided into a
/// grid of cells of image_size/grid, and a patch x patch window is cut from
/// each cell at the centered offset jittered by up to +/- jitter pixels.
struct JigsawGeometry {
  int image_size = 96;
  int patch = 24;
  int jitter = 4;

  void validate(int grid) const;
};

/// Crop -> resize -> per-cell patch extraction -> per-patch photometric
/// augmentation -> reorder by pset.perms[perm_id]. Output slot k holds the
/// patch of cell perms[perm_id][k].
PatchSet jigsaw_transform(const ImageU8& img, int perm_id, const PermutationSet& pset,
                          const AugmentConfig& aug, const JigsawGeometry& geom, uint64_t seed);

/// k in {0,1,2,3}: exact counter-clockwise quarter-turn rotation.
ImageU8 rotation_transform(const ImageU8& img, int k);
std::vector<float> rotation_transform(const std::vector<float>& chw, int channels, int h, int w,
                                      int k);

/// Random resized crop + horizontal flip + photometric jitter, resized to
/// size x size, scaled to [0,1] and channel-standardized with `stats`.
/// Returns a [3,size,size] buffer; deterministic in (img, aug, seed).
std::vector<float> standard_augment(const ImageU8& img, const AugmentConfig& aug, int size,
                                    const ChannelStats& stats, uint64_t seed);

/// The stochastic stages of standard_augment without the final
/// standardization; used by the jigsaw pipeline before patch extraction.
ImageF augment_to_float(const ImageU8& img, const AugmentConfig& aug, int size, uint64_t seed,
                        bool with_photometric);

/// In-place brightness/contrast/saturation/hue jitter with independent draws.
void photometric_jitter(ImageF& img, const AugmentConfig& aug, Rng& rng);

}  // namespace pirl
