#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace pcflow {

// H x W x 3 raster, row-major, values in [0,1]. Images that persist to disk
// (reference captures, crops) are quantized to the byte grid at creation so
// that a PPM round-trip is lossless.
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;  // size = width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0.0f) {}

  float* pixel(int x, int y) { return &rgb[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3]; }
  const float* pixel(int x, int y) const {
    return &rgb[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * 3];
  }
  bool operator==(const Image&) const = default;
};

constexpr float kDepthEmpty = std::numeric_limits<float>::infinity();

struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> depth;  // camera-frame z; +inf where nothing was written

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), depth(std::size_t(w) * std::size_t(h), kDepthEmpty) {}

  float at(int x, int y) const { return depth[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  float& at(int x, int y) { return depth[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  bool operator==(const DepthMap&) const = default;
};

inline float quantize_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  const int b = int(c * 255.0f + 0.5f);
  return float(b) / 255.0f;
}

// Snaps every channel to the byte grid in place.
void quantize_image(Image& img);

// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

}  // namespace pcflow
