#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annotations.hpp"

namespace boneage {

/// Single-channel raster, row-major, intensities in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  GrayImage() = default;
  GrayImage(int w, int h, double fill = 0.0)
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

/// Binary instance mask, row-major, bits in {0,1}.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h)
      : width(w), height(h),
        bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  std::uint8_t& at(int x, int y) {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
};

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;  // exclusive
  bool operator==(const BoundingBox&) const = default;
};

enum class ResizeMode { Nearest, Bilinear };

/// Pixel (i,j) is set iff its center (i+0.5, j+0.5) lies inside the polygon
/// under the even-odd rule. Implemented as a scanline fill; the per-row edge
/// crossings use the same half-open predicate as a brute-force per-pixel
/// point-in-polygon test, so the two agree bit for bit, boundary centers
/// included.
Mask rasterize(const std::vector<Vertex>& polygon, int width, int height);

/// Union of the rasterized polygons of every annotation attached to the
/// image (the single-category segmentation case).
Mask rasterize_union(const std::vector<const Annotation*>& annotations,
                     int width, int height);

/// output[p] = image[p] where mask is set, else the background intensity.
GrayImage apply_mask(const GrayImage& image, const Mask& mask,
                     double background);

/// Tight inclusive-exclusive box over the set bits; nullopt when empty.
std::optional<BoundingBox> bounding_box(const Mask& mask);

GrayImage resize(const GrayImage& image, int out_width, int out_height,
                 ResizeMode mode);

// 8-bit binary PGM (P5). Intensities map linearly: write rounds v*255,
// read divides by 255. Masks use {0,255}.
std::string encode_pgm(const GrayImage& image);
std::string encode_pgm(const Mask& mask);
GrayImage decode_pgm(const std::string& bytes);
Mask decode_pgm_mask(const std::string& bytes);

}  // namespace boneage
