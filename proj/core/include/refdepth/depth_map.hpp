#pragma once

#include <cstdint>
#include <vector>

namespace refdepth {

/// Dense per-pixel metric depth raster (meters, f32) with a validity mask.
/// Row-major, row 0 at the top. Invalid pixels carry no depth semantics and
/// are excluded from every loss and metric.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> values;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h, float value = 0.0f, bool is_valid = false)
      : width(w), height(h), values(static_cast<size_t>(w) * h, value),
        valid(static_cast<size_t>(w) * h, is_valid ? 1 : 0) {}

  size_t size() const { return values.size(); }
  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }

  float& at(int x, int y) { return values[idx(x, y)]; }
  float at(int x, int y) const { return values[idx(x, y)]; }
  bool is_valid(int x, int y) const { return valid[idx(x, y)] != 0; }
  void set(int x, int y, float v) {
    values[idx(x, y)] = v;
    valid[idx(x, y)] = 1;
  }
};

/// Single-channel image raster, values in [0, 1].
struct GrayImage {
  int width = 0, height = 0;
  std::vector<float> values;

  GrayImage() = default;
  GrayImage(int w, int h, float value = 0.0f)
      : width(w), height(h), values(static_cast<size_t>(w) * h, value) {}

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  float& at(int x, int y) { return values[idx(x, y)]; }
  float at(int x, int y) const { return values[idx(x, y)]; }
};

inline DepthMap flip_horizontal(const DepthMap& m) {
  DepthMap out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      out.values[out.idx(x, y)] = m.values[m.idx(m.width - 1 - x, y)];
      out.valid[out.idx(x, y)] = m.valid[m.idx(m.width - 1 - x, y)];
    }
  return out;
}

inline GrayImage flip_horizontal(const GrayImage& m) {
  GrayImage out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      out.values[out.idx(x, y)] = m.values[m.idx(m.width - 1 - x, y)];
  return out;
}

/// Nearest-neighbor resample. Preserves metric depth values exactly and
/// carries validity through unchanged.
inline DepthMap resize_nearest(const DepthMap& m, int w, int h) {
  DepthMap out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = static_cast<int>((static_cast<int64_t>(y) * m.height) / h);
    for (int x = 0; x < w; ++x) {
      const int sx = static_cast<int>((static_cast<int64_t>(x) * m.width) / w);
      out.values[out.idx(x, y)] = m.values[m.idx(sx, sy)];
      out.valid[out.idx(x, y)] = m.valid[m.idx(sx, sy)];
    }
  }
  return out;
}

}  // namespace refdepth
