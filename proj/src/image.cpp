#include "pirl/image.hpp"

#include <algorithm>
#include <cmath>

namespace pirl {

ImageF crop_resize_bilinear(const ImageU8& img, int y0, int x0, int h, int w, int oh, int ow) {
  PIRL_CHECK(h >= 1 && w >= 1 && oh >= 1 && ow >= 1, "crop_resize: empty extent");
  PIRL_CHECK(y0 >= 0 && x0 >= 0 && y0 + h <= img.height && x0 + w <= img.width,
             "crop_resize: rect ", y0, ",", x0, " ", h, "x", w, " outside image ", img.height,
             "x", img.width);
  ImageF out(oh, ow);
  const float sy = static_cast<float>(h) / static_cast<float>(oh);
  const float sx = static_cast<float>(w) / static_cast<float>(ow);
  for (int r = 0; r < oh; ++r) {
    float fy = (static_cast<float>(r) + 0.5f) * sy - 0.5f;
    fy = std::min(std::max(fy, 0.f), static_cast<float>(h - 1));
    const int r0 = static_cast<int>(fy);
    const int r1 = std::min(r0 + 1, h - 1);
    const float wy = fy - static_cast<float>(r0);
    for (int c = 0; c < ow; ++c) {
      float fx = (static_cast<float>(c) + 0.5f) * sx - 0.5f;
      fx = std::min(std::max(fx, 0.f), static_cast<float>(w - 1));
      const int c0 = static_cast<int>(fx);
      const int c1 = std::min(c0 + 1, w - 1);
      const float wx = fx - static_cast<float>(c0);
      for (int ch = 0; ch < 3; ++ch) {
        const float v00 = static_cast<float>(img.at(ch, y0 + r0, x0 + c0));
        const float v01 = static_cast<float>(img.at(ch, y0 + r0, x0 + c1));
        const float v10 = static_cast<float>(img.at(ch, y0 + r1, x0 + c0));
        const float v11 = static_cast<float>(img.at(ch, y0 + r1, x0 + c1));
        const float top = v00 + (v01 - v00) * wx;
        const float bot = v10 + (v11 - v10) * wx;
        out.at(ch, r, c) = (top + (bot - top) * wy) / 255.f;
      }
    }
  }
  return out;
}

namespace {

// one counter-clockwise quarter turn: out(r,c) = in(c, W-1-r); equals the
// square-image convention out(r,c) = in(c, H-1-r) whenever H == W
ImageU8 rot1(const ImageU8& in) {
  ImageU8 out(in.width, in.height);
  out.label = in.label;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < out.height; ++r)
      for (int c = 0; c < out.width; ++c) out.at(ch, r, c) = in.at(ch, c, in.width - 1 - r);
  return out;
}

}  // namespace

ImageU8 rotate90(const ImageU8& img, int k) {
  PIRL_CHECK(k >= 0 && k <= 3, "rotate90: k must be in {0,1,2,3}, got ", k);
  ImageU8 out = img;
  for (int i = 0; i < k; ++i) out = rot1(out);
  return out;
}

std::vector<float> rotate90_chw(const std::vector<float>& in, int channels, int h, int w, int k) {
  PIRL_CHECK(k >= 0 && k <= 3, "rotate90: k must be in {0,1,2,3}, got ", k);
  PIRL_CHECK(static_cast<size_t>(channels) * h * w == in.size(), "rotate90: buffer length ",
             in.size(), " does not match ", channels, "x", h, "x", w);
  std::vector<float> cur = in;
  int ch = h, cw = w;
  for (int i = 0; i < k; ++i) {
    std::vector<float> next(cur.size());
    const int nh = cw, nw = ch;  // out(r,c) = in(c, cw-1-r)
    for (int c = 0; c < channels; ++c)
      for (int r = 0; r < nh; ++r)
        for (int col = 0; col < nw; ++col)
          next[(static_cast<size_t>(c) * nh + r) * nw + col] =
              cur[(static_cast<size_t>(c) * ch + col) * cw + (cw - 1 - r)];
    cur = std::move(next);
    ch = nh;
    cw = nw;
  }
  return cur;
}

void flip_horizontal(ImageF& img) {
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < img.height; ++r)
      for (int a = 0, b = img.width - 1; a < b; ++a, --b)
        std::swap(img.at(c, r, a), img.at(c, r, b));
}

}  // namespace pirl
