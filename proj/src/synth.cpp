#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "error.hpp"
#include "rng.hpp"

namespace boneage {

namespace {

constexpr double kBackground = 0.08;
constexpr double kBlobValueLo = 0.65;
constexpr double kBlobValueHi = 0.95;
constexpr double kRadiusLo = 0.05;   // fraction of image side
constexpr double kRadiusHi = 0.07;
constexpr double kPolygonOutset = 1.08;
constexpr double kMinGap = 3.0;      // pixels between blob rims
constexpr double kFrameMargin = 4.0;
constexpr int kRimSamples = 24;

struct Blob {
  double cx, cy, rx, ry, value;
};

double cross(const Vertex& o, const Vertex& a, const Vertex& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; returns the hull without repeating the first
// vertex. Inputs here are ellipse rim samples, never all collinear.
std::vector<Vertex> convex_hull(std::vector<Vertex> points) {
  std::sort(points.begin(), points.end(), [](const Vertex& a, const Vertex& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const std::size_t n = points.size();
  std::vector<Vertex> hull(2 * n);
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (h >= 2 && cross(hull[h - 2], hull[h - 1], points[i]) <= 0.0) {
      --h;
    }
    hull[h++] = points[i];
  }
  for (std::size_t i = n - 1, lower = h + 1; i > 0; --i) {
    while (h >= lower && cross(hull[h - 2], hull[h - 1], points[i - 1]) <= 0.0) {
      --h;
    }
    hull[h++] = points[i - 1];
  }
  hull.resize(h - 1);
  if (hull.size() < 3) {
    fail(ErrorKind::Geometry, "degenerate blob hull");
  }
  return hull;
}

std::vector<Blob> place_blobs(int k, double size, Rng& rng) {
  std::vector<Blob> blobs;
  blobs.reserve(k);
  int attempts = 0;
  while (static_cast<int>(blobs.size()) < k) {
    if (++attempts > 1000 * k) {
      fail(ErrorKind::Domain,
           "could not place non-overlapping blobs; frame too crowded");
    }
    Blob b;
    b.rx = size * rng.uniform(kRadiusLo, kRadiusHi);
    b.ry = size * rng.uniform(kRadiusLo, kRadiusHi);
    const double reach = kPolygonOutset * std::max(b.rx, b.ry) + kFrameMargin;
    b.cx = rng.uniform(reach, size - reach);
    b.cy = rng.uniform(reach, size - reach);
    bool clear = true;
    for (const Blob& other : blobs) {
      const double need = std::max(b.rx, b.ry) +
                          std::max(other.rx, other.ry) + kMinGap;
      if (std::hypot(b.cx - other.cx, b.cy - other.cy) <= need) {
        clear = false;
        break;
      }
    }
    if (clear) {
      blobs.push_back(b);
    }
  }
  for (Blob& b : blobs) {
    b.value = rng.uniform(kBlobValueLo, kBlobValueHi);
  }
  return blobs;
}

GrayImage paint(const std::vector<Blob>& blobs, int size, double noise_sd,
                Rng& rng) {
  GrayImage img(size, size, kBackground);
  for (const Blob& b : blobs) {
    const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - b.rx)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(b.cx + b.rx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - b.ry)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(b.cy + b.ry)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double u = (x + 0.5 - b.cx) / b.rx;
        const double v = (y + 0.5 - b.cy) / b.ry;
        if (u * u + v * v <= 1.0) {
          img.at(x, y) = b.value;
        }
      }
    }
  }
  for (double& v : img.data) {
    v = std::clamp(v + noise_sd * rng.normal(), 0.0, 1.0);
  }
  return img;
}

std::vector<Vertex> cover_polygon(const std::vector<Blob>& blobs, double size) {
  if (blobs.empty()) {
    // Zero-blob images still need an annotation; use a central square.
    const double a = size / 4.0;
    const double b = 3.0 * size / 4.0;
    return {{a, a}, {b, a}, {b, b}, {a, b}};
  }
  std::vector<Vertex> rim;
  rim.reserve(blobs.size() * kRimSamples);
  for (const Blob& b : blobs) {
    for (int t = 0; t < kRimSamples; ++t) {
      const double ang = 2.0 * std::numbers::pi * t / kRimSamples;
      Vertex v{b.cx + kPolygonOutset * b.rx * std::cos(ang),
               b.cy + kPolygonOutset * b.ry * std::sin(ang)};
      v.x = std::clamp(v.x, 0.0, size);
      v.y = std::clamp(v.y, 0.0, size);
      rim.push_back(v);
    }
  }
  return convex_hull(std::move(rim));
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.count < 1) {
    fail(ErrorKind::Config, "count must be >= 1");
  }
  if (spec.image_size < 16) {
    fail(ErrorKind::Config, "image_size must be >= 16");
  }
  if (spec.k_min < 0 || spec.k_min > spec.k_max) {
    fail(ErrorKind::Config, "blob count range must satisfy 0 <= k_min <= k_max");
  }
  if (spec.noise_sd < 0.0) {
    fail(ErrorKind::Config, "noise_sd must be >= 0");
  }
  for (int k : {spec.k_min, spec.k_max}) {
    const double target = spec.age_a * k + spec.age_b;
    if (!(target >= 0.0 && target <= 300.0)) {
      fail(ErrorKind::Config,
           "age rule must keep every reachable target in [0,300] months");
    }
  }
}

SynthResult generate(const SynthSpec& spec) {
  validate(spec);
  SynthResult out;
  out.dataset.categories.push_back({1, "hand"});
  out.images.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Rng rng(derive_seed(spec.seed, {kStreamImage, static_cast<std::uint64_t>(i)}));
    const int k =
        spec.k_min + static_cast<int>(rng.below(spec.k_max - spec.k_min + 1));
    std::vector<Blob> blobs = place_blobs(k, spec.image_size, rng);
    out.images.push_back(paint(blobs, spec.image_size, spec.noise_sd, rng));

    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d.pgm", i);
    ImageRecord rec;
    rec.id = i + 1;
    rec.file_name = name;
    rec.width = spec.image_size;
    rec.height = spec.image_size;
    rec.cohort = (i % 2 == 0) ? Cohort::Male : Cohort::Female;
    rec.target_age = spec.age_a * k + spec.age_b;
    out.dataset.images.push_back(std::move(rec));

    Annotation ann;
    ann.id = i + 1;
    ann.image_id = i + 1;
    ann.category_id = 1;
    ann.polygon = cover_polygon(blobs, spec.image_size);
    out.dataset.annotations.push_back(std::move(ann));
  }
  validate(out.dataset);
  return out;
}

}  // namespace boneage
