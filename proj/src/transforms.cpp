#include "pirl/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace pirl {

void AugmentConfig::validate() const {
  PIRL_CHECK(crop_area_min > 0.0 && crop_area_min <= 1.0,
             "crop-area bound must lie in (0,1], got ", crop_area_min);
  PIRL_CHECK(flip_prob >= 0.0 && flip_prob <= 1.0, "flip probability must lie in [0,1], got ",
             flip_prob);
  PIRL_CHECK(jitter_brightness >= 0.0 && jitter_contrast >= 0.0 && jitter_saturation >= 0.0,
             "jitter ranges must be non-negative");
  PIRL_CHECK(jitter_hue >= 0.0 && jitter_hue <= 0.5, "hue jitter must lie in [0,0.5], got ",
             jitter_hue);
}

int64_t permutation_space_size(int g) {
  PIRL_CHECK(g >= 1, "grid side must be >= 1, got ", g);
  const int slots = g * g;
  int64_t f = 1;
  for (int i = 2; i <= slots; ++i) {
    if (f > 1000000000000000000LL / i) return 1000000000000000000LL;
    f *= i;
  }
  return f;
}

namespace {

int hamming(const std::vector<int>& a, const std::vector<int>& b) {
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += a[i] != b[i] ? 1 : 0;
  return d;
}

// min Hamming distance from cand to the chosen set, early-exiting once the
// running minimum cannot beat `beat`
int min_dist_to(const std::vector<std::vector<int>>& chosen, const std::vector<int>& cand,
                int beat) {
  int m = static_cast<int>(cand.size()) + 1;
  for (const auto& p : chosen) {
    m = std::min(m, hamming(p, cand));
    if (m <= beat) return m;
  }
  return m;
}

std::vector<int> random_perm(int slots, Rng& rng) {
  std::vector<int> p(static_cast<size_t>(slots));
  std::iota(p.begin(), p.end(), 0);
  for (int i = slots - 1; i > 0; --i)
    std::swap(p[static_cast<size_t>(i)], p[rng.below(static_cast<uint64_t>(i) + 1)]);
  return p;
}

std::vector<std::vector<int>> enumerate_all(int slots) {
  std::vector<int> p(static_cast<size_t>(slots));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> all;
  do {
    all.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return all;
}

}  // namespace

PermutationSet generate_permutation_set(int g, int64_t n, int64_t seed) {
  const int64_t space = permutation_space_size(g);
  PIRL_CHECK(n >= 1, "permutation set size must be >= 1, got ", n);
  PIRL_CHECK(n <= space, "set-too-large: requested ", n, " permutations but (", g, "^2)! = ",
             space);
  const int slots = g * g;

  PermutationSet out;
  out.grid = g;
  out.seed = seed;
  Rng rng(static_cast<uint64_t>(seed) ^ 0x7065726d75746574ULL);

  if (space <= 720) {
    // small spaces: exact greedy over the full enumeration
    auto all = enumerate_all(slots);
    std::vector<bool> used(all.size(), false);
    size_t start = rng.below(all.size());
    out.perms.push_back(all[start]);
    used[start] = true;
    while (static_cast<int64_t>(out.perms.size()) < n) {
      int best = -1;
      size_t best_i = 0;
      for (size_t i = 0; i < all.size(); ++i) {
        if (used[i]) continue;
        const int d = min_dist_to(out.perms, all[i], best);
        if (d > best) {
          best = d;
          best_i = i;
        }
      }
      out.perms.push_back(all[best_i]);
      used[best_i] = true;
    }
    return out;
  }

  std::set<std::vector<int>> chosen_keys;
  out.perms.push_back(random_perm(slots, rng));
  chosen_keys.insert(out.perms.back());

  constexpr int kPool = 32;
  while (static_cast<int64_t>(out.perms.size()) < n) {
    std::vector<std::vector<int>> pool;
    std::set<std::vector<int>> pool_keys;
    for (int attempt = 0; attempt < kPool * 64 && static_cast<int>(pool.size()) < kPool;
         ++attempt) {
      auto cand = random_perm(slots, rng);
      if (chosen_keys.count(cand) || pool_keys.count(cand)) continue;
      pool_keys.insert(cand);
      pool.push_back(std::move(cand));
    }
    if (pool.empty()) {
      // nearly exhausted space: fall back to scanning the full enumeration
      PIRL_CHECK(slots <= 9, "permutation space exhausted by rejection sampling for g=", g);
      auto all = enumerate_all(slots);
      int best = -1;
      size_t best_i = all.size();
      for (size_t i = 0; i < all.size(); ++i) {
        if (chosen_keys.count(all[i])) continue;
        const int d = min_dist_to(out.perms, all[i], best);
        if (d > best) {
          best = d;
          best_i = i;
        }
      }
      PIRL_CHECK(best_i < all.size(), "set-too-large: permutation space exhausted");
      out.perms.push_back(all[best_i]);
      chosen_keys.insert(all[best_i]);
      continue;
    }
    int best = -1;
    size_t best_i = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
      const int d = min_dist_to(out.perms, pool[i], best);
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    out.perms.push_back(pool[best_i]);
    chosen_keys.insert(pool[best_i]);
  }
  return out;
}

int PermutationSet::min_pairwise_hamming() const {
  if (perms.size() < 2) return slots();
  int m = slots() + 1;
  for (size_t i = 0; i < perms.size(); ++i)
    for (size_t j = i + 1; j < perms.size(); ++j) {
      m = std::min(m, hamming(perms[i], perms[j]));
      if (m <= 1) return m;
    }
  return m;
}

void PermutationSet::save(const std::string& path) const {
  std::ofstream f(path);
  PIRL_CHECK(f.good(), "cannot open ", path, " for writing");
  f << grid << " " << perms.size() << " " << seed << "\n";
  for (const auto& p : perms) {
    for (size_t i = 0; i < p.size(); ++i) f << (i ? " " : "") << p[i];
    f << "\n";
  }
  PIRL_CHECK(f.good(), "write failed for ", path);
}

PermutationSet PermutationSet::load(const std::string& path) {
  std::ifstream f(path);
  PIRL_CHECK(f.good(), "cannot open permutation file ", path);
  PermutationSet out;
  int64_t n = 0;
  PIRL_CHECK(static_cast<bool>(f >> out.grid >> n >> out.seed), "malformed header in ", path);
  PIRL_CHECK(out.grid >= 1 && n >= 0, "malformed header in ", path);
  const int slots = out.grid * out.grid;
  out.perms.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    auto& p = out.perms[static_cast<size_t>(i)];
    p.resize(static_cast<size_t>(slots));
    std::vector<bool> seen(static_cast<size_t>(slots), false);
    for (int s = 0; s < slots; ++s) {
      PIRL_CHECK(static_cast<bool>(f >> p[static_cast<size_t>(s)]), "truncated permutation ", i,
                 " in ", path);
      const int v = p[static_cast<size_t>(s)];
      PIRL_CHECK(v >= 0 && v < slots && !seen[static_cast<size_t>(v)],
                 "permutation ", i, " in ", path, " is not a bijection");
      seen[static_cast<size_t>(v)] = true;
    }
  }
  return out;
}

namespace {

struct CropRect {
  int y0, x0, h, w;
};

// torchvision-style random resized crop: area fraction in [area_min, 1],
// aspect ratio in [3/4, 4/3], center-crop fallback after 10 attempts
CropRect draw_crop_rect(int H, int W, double area_min, Rng& rng) {
  const double area = static_cast<double>(H) * W;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(area_min, 1.0);
    const double log_r = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_r);
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w < 1 || h < 1 || w > W || h > H) continue;
    const int y0 = static_cast<int>(rng.below(static_cast<uint64_t>(H - h) + 1));
    const int x0 = static_cast<int>(rng.below(static_cast<uint64_t>(W - w) + 1));
    return {y0, x0, h, w};
  }
  const int side = std::min(H, W);
  return {(H - side) / 2, (W - side) / 2, side, side};
}

float clamp01(float v) { return std::min(1.f, std::max(0.f, v)); }

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  v = mx;
  const float d = mx - mn;
  s = mx <= 0.f ? 0.f : d / mx;
  if (d <= 0.f) {
    h = 0.f;
    return;
  }
  if (mx == r)
    h = (g - b) / d + (g < b ? 6.f : 0.f);
  else if (mx == g)
    h = (b - r) / d + 2.f;
  else
    h = (r - g) / d + 4.f;
  h /= 6.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = h - std::floor(h);
  const float x = h * 6.f;
  const int i = std::min(5, static_cast<int>(x));
  const float f = x - static_cast<float>(i);
  const float p = v * (1.f - s);
  const float q = v * (1.f - s * f);
  const float t = v * (1.f - s * (1.f - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

}  // namespace

void photometric_jitter(ImageF& img, const AugmentConfig& aug, Rng& rng) {
  const int hw = img.height * img.width;
  float* R = img.data.data();
  float* G = R + hw;
  float* B = G + hw;

  if (aug.jitter_brightness > 0.0) {
    const float f = static_cast<float>(1.0 + rng.uniform(-aug.jitter_brightness, aug.jitter_brightness));
    for (int i = 0; i < hw; ++i) {
      R[i] = clamp01(R[i] * f);
      G[i] = clamp01(G[i] * f);
      B[i] = clamp01(B[i] * f);
    }
  }
  if (aug.jitter_contrast > 0.0) {
    const float f = static_cast<float>(1.0 + rng.uniform(-aug.jitter_contrast, aug.jitter_contrast));
    double m = 0.0;
    for (int i = 0; i < hw; ++i) m += luma(R[i], G[i], B[i]);
    const float mean = static_cast<float>(m / hw);
    for (int i = 0; i < hw; ++i) {
      R[i] = clamp01(mean + (R[i] - mean) * f);
      G[i] = clamp01(mean + (G[i] - mean) * f);
      B[i] = clamp01(mean + (B[i] - mean) * f);
    }
  }
  if (aug.jitter_saturation > 0.0) {
    const float f = static_cast<float>(1.0 + rng.uniform(-aug.jitter_saturation, aug.jitter_saturation));
    for (int i = 0; i < hw; ++i) {
      const float l = luma(R[i], G[i], B[i]);
      R[i] = clamp01(l + (R[i] - l) * f);
      G[i] = clamp01(l + (G[i] - l) * f);
      B[i] = clamp01(l + (B[i] - l) * f);
    }
  }
  if (aug.jitter_hue > 0.0) {
    const float shift = static_cast<float>(rng.uniform(-aug.jitter_hue, aug.jitter_hue));
    for (int i = 0; i < hw; ++i) {
      float h, s, v;
      rgb_to_hsv(R[i], G[i], B[i], h, s, v);
      hsv_to_rgb(h + shift, s, v, R[i], G[i], B[i]);
    }
  }
}

ImageF augment_to_float(const ImageU8& img, const AugmentConfig& aug, int size, uint64_t seed,
                        bool with_photometric) {
  aug.validate();
  PIRL_CHECK(img.height >= 2 && img.width >= 2, "image ", img.height, "x", img.width,
             " smaller than minimum crop size 2x2");
  Rng rng(seed);
  CropRect rect{0, 0, img.height, img.width};
  if (aug.crop_area_min < 1.0) rect = draw_crop_rect(img.height, img.width, aug.crop_area_min, rng);
  ImageF out = crop_resize_bilinear(img, rect.y0, rect.x0, rect.h, rect.w, size, size);
  if (aug.flip_prob > 0.0 && rng.bernoulli(aug.flip_prob)) flip_horizontal(out);
  if (with_photometric) photometric_jitter(out, aug, rng);
  return out;
}

std::vector<float> standard_augment(const ImageU8& img, const AugmentConfig& aug, int size,
                                    const ChannelStats& stats, uint64_t seed) {
  ImageF f = augment_to_float(img, aug, size, seed, true);
  std::vector<float> out(f.data.size());
  const int hw = size * size;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < hw; ++i)
      out[static_cast<size_t>(c) * hw + i] =
          (f.data[static_cast<size_t>(c) * hw + i] - stats.mean[c]) / stats.stdev[c];
  return out;
}

void JigsawGeometry::validate(int grid) const {
  PIRL_CHECK(grid >= 1, "grid side must be >= 1");
  PIRL_CHECK(image_size >= grid && image_size % grid == 0, "working size ", image_size,
             " must be divisible by grid ", grid);
  const int cell = image_size / grid;
  PIRL_CHECK(patch >= 1 && patch < cell, "patch ", patch, " must satisfy 1 <= patch < cell ",
             cell);
  const int center = (cell - patch) / 2;
  PIRL_CHECK(jitter >= 0 && jitter <= center && jitter <= cell - patch - center,
             "jitter ", jitter, " exceeds slack for patch ", patch, " in cell ", cell);
}

PatchSet jigsaw_transform(const ImageU8& img, int perm_id, const PermutationSet& pset,
                          const AugmentConfig& aug, const JigsawGeometry& geom, uint64_t seed) {
  geom.validate(pset.grid);
  PIRL_CHECK(perm_id >= 0 && perm_id < pset.size(), "perm-id ", perm_id,
             " outside permutation set of size ", pset.size());
  const int g = pset.grid;
  const int cell = geom.image_size / g;
  const int p = geom.patch;

  Rng rng(seed);
  ImageF base = augment_to_float(img, aug, geom.image_size, derive_seed(seed, "jigsaw-crop"),
                                 /*with_photometric=*/false);

  // patches in cell (row-major) order, photometric jitter per patch
  std::vector<ImageF> patches(static_cast<size_t>(g) * g);
  for (int cr = 0; cr < g; ++cr)
    for (int cc = 0; cc < g; ++cc) {
      const int k = cr * g + cc;
      const int center = (cell - p) / 2;
      int dy = center, dx = center;
      if (geom.jitter > 0) {
        dy = center - geom.jitter + static_cast<int>(rng.below(2 * geom.jitter + 1));
        dx = center - geom.jitter + static_cast<int>(rng.below(2 * geom.jitter + 1));
      }
      ImageF patch(p, p);
      const int y0 = cr * cell + dy;
      const int x0 = cc * cell + dx;
      for (int c = 0; c < 3; ++c)
        for (int r = 0; r < p; ++r)
          for (int col = 0; col < p; ++col) patch.at(c, r, col) = base.at(c, y0 + r, x0 + col);
      Rng prng(derive_seed(seed, "patch-jitter", static_cast<uint64_t>(k)));
      photometric_jitter(patch, aug, prng);
      patches[static_cast<size_t>(k)] = std::move(patch);
    }

  PatchSet out;
  out.grid = g;
  out.patch = p;
  out.perm_id = perm_id;
  out.data.resize(static_cast<size_t>(g) * g * 3 * p * p);
  const auto& perm = pset.perms[static_cast<size_t>(perm_id)];
  for (int k = 0; k < g * g; ++k) {
    const auto& src = patches[static_cast<size_t>(perm[static_cast<size_t>(k)])];
    std::copy(src.data.begin(), src.data.end(), out.patch_data(k));
  }
  return out;
}

ImageU8 rotation_transform(const ImageU8& img, int k) { return rotate90(img, k); }

std::vector<float> rotation_transform(const std::vector<float>& chw, int channels, int h, int w,
                                      int k) {
  return rotate90_chw(chw, channels, h, w, k);
}

}  // namespace pirl
