#pragma once

#include <cstdint>
#include <vector>

#include "pirl/common.hpp"

namespace pirl {

/// 8-bit RGB image, planar channel layout [3][h][w], optional class label.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;
  int label = -1;

  ImageU8() = default;
  ImageU8(int h, int w) : height(h), width(w), data(static_cast<size_t>(3) * h * w, 0) {}

  uint8_t at(int c, int r, int col) const {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
  uint8_t& at(int c, int r, int col) {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
};

/// Float RGB image in [0,1], planar [3][h][w].
struct ImageF {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int h, int w) : height(h), width(w), data(static_cast<size_t>(3) * h * w, 0.f) {}

  float at(int c, int r, int col) const {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
  float& at(int c, int r, int col) {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
};

/// Per-channel standardization statistics of a dataset's train split.
struct ChannelStats {
  float mean[3] = {0.f, 0.f, 0.f};
  float stdev[3] = {1.f, 1.f, 1.f};
};

/// Bilinear resize of a source rectangle [y0,y0+h) x [x0,x0+w) to oh x ow,
/// sampling at half-pixel centers.
ImageF crop_resize_bilinear(const ImageU8& img, int y0, int x0, int h, int w, int oh, int ow);

/// Exact 90-degree rotation, k in {0,1,2,3} counter-clockwise quarter turns:
/// k=1 maps out(r,c) = in(c, H-1-r) for an HxW input (output is WxH).
ImageU8 rotate90(const ImageU8& img, int k);

/// Same rotation on a planar [C][H][W] float buffer.
std::vector<float> rotate90_chw(const std::vector<float>& in, int channels, int h, int w, int k);

void flip_horizontal(ImageF& img);

}  // namespace pirl
