#include "pirl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "pirl/rng.hpp"

namespace pirl {

bool Dataset::labeled() const {
  for (const auto& img : images)
    if (img.label < 0) return false;
  return !images.empty();
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(img.label);
  return out;
}

Dataset Dataset::slice(int begin, int count) const {
  PIRL_CHECK(begin >= 0 && count >= 0 && begin + count <= size(), "slice [", begin, ",",
             begin + count, ") outside dataset of size ", size());
  Dataset out;
  out.source = source + "[" + std::to_string(begin) + ":" + std::to_string(begin + count) + "]";
  out.images.assign(images.begin() + begin, images.begin() + begin + count);
  return out;
}

namespace {
constexpr int kCifarSide = 32;
constexpr size_t kRecordLen = 1 + 3 * kCifarSide * kCifarSide;
}  // namespace

std::vector<ImageU8> load_cifar_batch_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PIRL_CHECK(f.good(), "cannot open ", path);
  f.seekg(0, std::ios::end);
  const auto len = static_cast<size_t>(f.tellg());
  f.seekg(0);
  PIRL_CHECK(len % kRecordLen == 0, "truncated-record in ", path, ": file length ", len,
             " leaves ", len % kRecordLen, " bytes at offset ", len - len % kRecordLen);
  const size_t count = len / kRecordLen;
  std::vector<ImageU8> out;
  out.reserve(count);
  std::vector<char> rec(kRecordLen);
  for (size_t i = 0; i < count; ++i) {
    PIRL_CHECK(static_cast<bool>(f.read(rec.data(), static_cast<std::streamsize>(kRecordLen))),
               "truncated-record in ", path, " at offset ", i * kRecordLen);
    ImageU8 img(kCifarSide, kCifarSide);
    img.label = static_cast<uint8_t>(rec[0]);
    PIRL_CHECK(img.label <= 9, "label ", img.label, " out of range in ", path, " record ", i);
    std::copy(rec.begin() + 1, rec.end(), reinterpret_cast<char*>(img.data.data()));
    out.push_back(std::move(img));
  }
  return out;
}

void save_cifar_batch_file(const std::vector<ImageU8>& images, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  PIRL_CHECK(f.good(), "cannot open ", path, " for writing");
  for (const auto& img : images) {
    PIRL_CHECK(img.height == kCifarSide && img.width == kCifarSide, "image ", img.height, "x",
               img.width, " does not fit the 32x32 record format");
    PIRL_CHECK(img.label >= 0 && img.label <= 9, "image label ", img.label,
               " does not fit the record format");
    const char lab = static_cast<char>(img.label);
    f.write(&lab, 1);
    f.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  }
  PIRL_CHECK(f.good(), "write failed for ", path);
}

CifarData load_cifar10(const std::string& dir) {
  CifarData out;
  out.train.source = "cifar10-train:" + dir;
  for (int b = 1; b <= 5; ++b) {
    auto batch = load_cifar_batch_file(dir + "/data_batch_" + std::to_string(b) + ".bin");
    out.train.images.insert(out.train.images.end(), batch.begin(), batch.end());
  }
  out.test.source = "cifar10-test:" + dir;
  out.test.images = load_cifar_batch_file(dir + "/test_batch.bin");
  return out;
}

namespace {

// integer HSV -> RGB, h in [0,360), s/v in [0,255]
void hsv_to_rgb_u8(int h, int s, int v, int& r, int& g, int& b) {
  const int region = (h / 60) % 6;
  const int rem = (h % 60) * 255 / 60;
  const int p = v * (255 - s) / 255;
  const int q = v * (255 - s * rem / 255) / 255;
  const int t = v * (255 - s * (255 - rem) / 255) / 255;
  switch (region) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

bool shape_hit(int cls, int dy, int dx, int R) {
  const int ady = std::abs(dy), adx = std::abs(dx);
  switch (cls) {
    case 0: return dy * dy + dx * dx <= R * R;                                    // disk
    case 1: return dy * dy + dx * dx <= R * R && dy * dy + dx * dx >= R * R / 4;  // ring
    case 2: return ady <= R * 7 / 8 && adx <= R * 7 / 8;                          // square
    case 3: {                                                                     // frame
      const int s = R * 7 / 8;
      return ady <= s && adx <= s && std::max(ady, adx) >= s / 2;
    }
    case 4: return ady + adx <= R;  // diamond
    case 5:                         // upward triangle
      return dy >= -R / 2 && dy <= R / 2 && adx <= dy + R / 2;
    case 6: return (adx <= R / 3 && ady <= R) || (ady <= R / 3 && adx <= R);  // plus
    case 7: return std::abs(adx - ady) <= R / 3 && adx <= R && ady <= R;      // X
    case 8: return ady <= R && adx <= R && (dy + R) % 4 < 2;                  // stripes
    case 9: return ady <= R && adx <= R && ((dy + R) / 3 + (dx + R) / 3) % 2 == 0;  // checker
  }
  return false;
}

}  // namespace

Dataset synth_dataset(int n, uint64_t seed) {
  PIRL_CHECK(n >= 1, "synth_dataset: n must be >= 1, got ", n);
  Dataset out;
  out.source = "synth:n=" + std::to_string(n) + ":seed=" + std::to_string(seed);
  out.images.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int cls = i % 10;
    Rng rng(derive_seed(seed, "synth-image", static_cast<uint64_t>(i)));
    ImageU8 img(kCifarSide, kCifarSide);
    img.label = cls;

    // textured dark background: base color + blocky integer noise
    const int base[3] = {static_cast<int>(rng.below(90)), static_cast<int>(rng.below(90)),
                         static_cast<int>(rng.below(90))};
    const uint64_t tex_seed = rng.next_u64();
    for (int r = 0; r < kCifarSide; ++r)
      for (int c = 0; c < kCifarSide; ++c) {
        const uint64_t h =
            derive_seed(tex_seed, "tex", static_cast<uint64_t>(r / 2), static_cast<uint64_t>(c / 2));
        for (int ch = 0; ch < 3; ++ch) {
          const int noise = static_cast<int>((h >> (ch * 8)) % 41) - 20;
          img.at(ch, r, c) = static_cast<uint8_t>(std::clamp(base[ch] + noise, 0, 255));
        }
      }

    // class-banded hue keeps classes learnable from pooled features while the
    // shape provides structure for patch-level tasks
    const int hue = (cls * 36 + static_cast<int>(rng.below(25)) - 12 + 360) % 360;
    const int sat = 200 + static_cast<int>(rng.below(56));
    const int val = 190 + static_cast<int>(rng.below(66));
    int fr, fg, fb;
    hsv_to_rgb_u8(hue, sat, val, fr, fg, fb);

    const int R = 8 + static_cast<int>(rng.below(5));
    const int cy = 15 + static_cast<int>(rng.below(7)) - 3;
    const int cx = 15 + static_cast<int>(rng.below(7)) - 3;
    for (int r = 0; r < kCifarSide; ++r)
      for (int c = 0; c < kCifarSide; ++c)
        if (shape_hit(cls, r - cy, c - cx, R)) {
          img.at(0, r, c) = static_cast<uint8_t>(fr);
          img.at(1, r, c) = static_cast<uint8_t>(fg);
          img.at(2, r, c) = static_cast<uint8_t>(fb);
        }
    out.images.push_back(std::move(img));
  }
  return out;
}

ChannelStats compute_channel_stats(const Dataset& data) {
  PIRL_CHECK(data.size() > 0, "channel stats of an empty dataset");
  ChannelStats stats;
  for (int c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    size_t count = 0;
    for (const auto& img : data.images) {
      const size_t hw = static_cast<size_t>(img.height) * img.width;
      const uint8_t* p = img.data.data() + static_cast<size_t>(c) * hw;
      for (size_t i = 0; i < hw; ++i) {
        const double v = static_cast<double>(p[i]) / 255.0;
        s += v;
        s2 += v * v;
      }
      count += hw;
    }
    const double mean = s / static_cast<double>(count);
    const double var = std::max(0.0, s2 / static_cast<double>(count) - mean * mean);
    stats.mean[c] = static_cast<float>(mean);
    stats.stdev[c] = static_cast<float>(std::max(std::sqrt(var), 1e-3));
  }
  return stats;
}

uint64_t dataset_hash(const Dataset& data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const auto& img : data.images) {
    mix(static_cast<uint64_t>(img.label) + 1);
    for (uint8_t b : img.data) mix(b);
  }
  return h;
}

}  // namespace pirl
