#include "augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace boneage {

void validate(const AugmentSpec& spec) {
  auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!probability(spec.flip_h) || !probability(spec.flip_v)) {
    fail(ErrorKind::Config, "flip probabilities must lie in [0,1]");
  }
  if (spec.max_shift < 0.0 || spec.max_shift > 0.5) {
    fail(ErrorKind::Config, "max_shift must lie in [0,0.5]");
  }
  if (spec.max_rotate < 0.0 || spec.max_rotate > 180.0) {
    fail(ErrorKind::Config, "max_rotate must lie in [0,180] degrees");
  }
  if (spec.zoom_range.first > spec.zoom_range.second ||
      spec.zoom_range.first <= 0.0) {
    fail(ErrorKind::Config, "zoom_range must satisfy 0 < lo <= hi");
  }
  if (spec.brightness_range.first > spec.brightness_range.second ||
      spec.brightness_range.first < 0.0) {
    fail(ErrorKind::Config, "brightness_range must satisfy 0 <= lo <= hi");
  }
}

Transform sample_transform(const AugmentSpec& spec, int width, int height,
                           Rng& rng) {
  validate(spec);
  Transform t;
  t.flip_h = rng.uniform() < spec.flip_h;
  t.flip_v = rng.uniform() < spec.flip_v;
  t.shift_x = rng.uniform(-spec.max_shift, spec.max_shift) * width;
  t.shift_y = rng.uniform(-spec.max_shift, spec.max_shift) * height;
  t.rotate_deg = rng.uniform(-spec.max_rotate, spec.max_rotate);
  t.zoom = rng.uniform(spec.zoom_range.first, spec.zoom_range.second);
  t.brightness =
      rng.uniform(spec.brightness_range.first, spec.brightness_range.second);
  return t;
}

namespace {

GrayImage flip_horizontal(const GrayImage& in) {
  GrayImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      out.at(x, y) = in.at(in.width - 1 - x, y);
    }
  }
  return out;
}

GrayImage flip_vertical(const GrayImage& in) {
  GrayImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      out.at(x, y) = in.at(x, in.height - 1 - y);
    }
  }
  return out;
}

// Forward point map about the center c: p -> zoom * R(theta) * (p + s - c) + c.
// The warp inverts it per output pixel center and samples the nearest source
// pixel; anything mapping outside the frame reads as 0.
GrayImage warp(const GrayImage& in, double shift_x, double shift_y,
               double rotate_deg, double zoom) {
  const double cx = in.width / 2.0;
  const double cy = in.height / 2.0;
  const double theta = rotate_deg * (std::numbers::pi / 180.0);
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  GrayImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double u = (x + 0.5 - cx) / zoom;
      const double v = (y + 0.5 - cy) / zoom;
      // Inverse rotation is the transpose: (u,v) -> (u cos + v sin,
      // -u sin + v cos).
      const double px = u * cos_t + v * sin_t + cx - shift_x;
      const double py = -u * sin_t + v * cos_t + cy - shift_y;
      const int sx = static_cast<int>(std::floor(px));
      const int sy = static_cast<int>(std::floor(py));
      if (sx >= 0 && sx < in.width && sy >= 0 && sy < in.height) {
        out.at(x, y) = in.at(sx, sy);
      }
    }
  }
  return out;
}

}  // namespace

GrayImage apply_transform(const GrayImage& image, const Transform& t) {
  GrayImage out = image;
  if (t.flip_h) {
    out = flip_horizontal(out);
  }
  if (t.flip_v) {
    out = flip_vertical(out);
  }
  if (t.shift_x != 0.0 || t.shift_y != 0.0 || t.rotate_deg != 0.0 ||
      t.zoom != 1.0) {
    out = warp(out, t.shift_x, t.shift_y, t.rotate_deg, t.zoom);
  }
  if (t.brightness != 1.0) {
    for (double& v : out.data) {
      v = std::clamp(v * t.brightness, 0.0, 1.0);
    }
  }
  return out;
}

GrayImage augment(const GrayImage& image, const AugmentSpec& spec, Rng& rng) {
  return apply_transform(image,
                         sample_transform(spec, image.width, image.height, rng));
}

}  // namespace boneage
