#include "image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "error.hpp"

namespace boneage {

Mask rasterize(const std::vector<Vertex>& polygon, int width, int height) {
  if (polygon.size() < 3) {
    fail(ErrorKind::Geometry, "polygon has fewer than 3 vertices");
  }
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::Shape, "mask dimensions must be positive");
  }
  Mask mask(width, height);
  const std::size_t n = polygon.size();
  std::vector<double> crossings;
  crossings.reserve(n);
  for (int j = 0; j < height; ++j) {
    const double cy = j + 0.5;
    crossings.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Vertex& a = polygon[e];
      const Vertex& b = polygon[(e + 1) % n];
      // Half-open in y: an edge contributes iff cy separates the endpoint
      // y-values under (a.y > cy) != (b.y > cy). Shared vertices are then
      // counted exactly once and horizontal edges never.
      if ((a.y > cy) != (b.y > cy)) {
        crossings.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    if (crossings.empty()) {
      continue;
    }
    std::sort(crossings.begin(), crossings.end());
    // Pixel center is inside iff an odd number of crossings lies strictly
    // to its right; idx tracks how many are <= cx as cx sweeps the row.
    std::size_t idx = 0;
    for (int i = 0; i < width; ++i) {
      const double cx = i + 0.5;
      while (idx < crossings.size() && crossings[idx] <= cx) {
        ++idx;
      }
      if ((crossings.size() - idx) % 2 == 1) {
        mask.at(i, j) = 1;
      }
    }
  }
  return mask;
}

Mask rasterize_union(const std::vector<const Annotation*>& annotations,
                     int width, int height) {
  Mask out(width, height);
  for (const Annotation* annotation : annotations) {
    Mask part = rasterize(annotation->polygon, width, height);
    for (std::size_t p = 0; p < out.bits.size(); ++p) {
      out.bits[p] |= part.bits[p];
    }
  }
  return out;
}

GrayImage apply_mask(const GrayImage& image, const Mask& mask,
                     double background) {
  if (image.width != mask.width || image.height != mask.height) {
    fail(ErrorKind::Shape, "image and mask dimensions differ");
  }
  if (background < 0.0 || background > 1.0) {
    fail(ErrorKind::Domain, "background intensity must lie in [0,1]");
  }
  GrayImage out(image.width, image.height);
  for (std::size_t p = 0; p < image.data.size(); ++p) {
    out.data[p] = mask.bits[p] ? image.data[p] : background;
  }
  return out;
}

std::optional<BoundingBox> bounding_box(const Mask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = 0, y1 = 0;
  bool any = false;
  for (int j = 0; j < mask.height; ++j) {
    for (int i = 0; i < mask.width; ++i) {
      if (mask.at(i, j)) {
        any = true;
        x0 = std::min(x0, i);
        y0 = std::min(y0, j);
        x1 = std::max(x1, i + 1);
        y1 = std::max(y1, j + 1);
      }
    }
  }
  if (!any) {
    return std::nullopt;
  }
  return BoundingBox{x0, y0, x1, y1};
}

GrayImage resize(const GrayImage& image, int out_width, int out_height,
                 ResizeMode mode) {
  if (out_width < 1 || out_height < 1) {
    fail(ErrorKind::Shape, "resize target dimensions must be >= 1");
  }
  GrayImage out(out_width, out_height);
  const double sx = static_cast<double>(image.width) / out_width;
  const double sy = static_cast<double>(image.height) / out_height;

  if (mode == ResizeMode::Nearest) {
    for (int j = 0; j < out_height; ++j) {
      int src_y = std::min(image.height - 1,
                           static_cast<int>(std::floor((j + 0.5) * sy)));
      for (int i = 0; i < out_width; ++i) {
        int src_x = std::min(image.width - 1,
                             static_cast<int>(std::floor((i + 0.5) * sx)));
        out.at(i, j) = image.at(src_x, src_y);
      }
    }
    return out;
  }

  for (int j = 0; j < out_height; ++j) {
    double fy = (j + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int ya = std::clamp(y0, 0, image.height - 1);
    int yb = std::clamp(y0 + 1, 0, image.height - 1);
    for (int i = 0; i < out_width; ++i) {
      double fx = (i + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int xa = std::clamp(x0, 0, image.width - 1);
      int xb = std::clamp(x0 + 1, 0, image.width - 1);
      double top = (1.0 - wx) * image.at(xa, ya) + wx * image.at(xb, ya);
      double bot = (1.0 - wx) * image.at(xa, yb) + wx * image.at(xb, yb);
      out.at(i, j) = std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0);
    }
  }
  return out;
}

namespace {

std::string pgm_header(int width, int height) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "P5\n%d %d\n255\n", width, height);
  return buf;
}

// Reads the three header integers, skipping whitespace and # comments.
struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail(ErrorKind::Parse, "not a binary PGM (P5) document");
  }
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') {
          ++pos;
        }
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
      fail(ErrorKind::Parse, "malformed PGM header");
    }
    long value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1 << 30) {
        fail(ErrorKind::Parse, "PGM header value out of range");
      }
      ++pos;
    }
    return static_cast<int>(value);
  };
  PgmHeader header;
  header.width = next_int();
  header.height = next_int();
  header.maxval = next_int();
  if (pos >= bytes.size()) {
    fail(ErrorKind::Parse, "PGM document truncated after header");
  }
  ++pos;  // single whitespace byte before raster data
  header.data_offset = pos;
  if (header.width <= 0 || header.height <= 0) {
    fail(ErrorKind::Parse, "PGM dimensions must be positive");
  }
  if (header.maxval != 255) {
    fail(ErrorKind::Parse, "only 8-bit PGM (maxval 255) is supported");
  }
  std::size_t expected = static_cast<std::size_t>(header.width) *
                         static_cast<std::size_t>(header.height);
  if (bytes.size() - header.data_offset < expected) {
    fail(ErrorKind::Parse, "PGM raster data truncated");
  }
  return header;
}

}  // namespace

std::string encode_pgm(const GrayImage& image) {
  std::string out = pgm_header(image.width, image.height);
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) {
    double clamped = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  return out;
}

std::string encode_pgm(const Mask& mask) {
  std::string out = pgm_header(mask.width, mask.height);
  out.reserve(out.size() + mask.bits.size());
  for (std::uint8_t bit : mask.bits) {
    out.push_back(static_cast<char>(bit ? 255 : 0));
  }
  return out;
}

GrayImage decode_pgm(const std::string& bytes) {
  PgmHeader header = parse_pgm_header(bytes);
  GrayImage image(header.width, header.height);
  for (std::size_t p = 0; p < image.data.size(); ++p) {
    image.data[p] =
        static_cast<unsigned char>(bytes[header.data_offset + p]) / 255.0;
  }
  return image;
}

Mask decode_pgm_mask(const std::string& bytes) {
  PgmHeader header = parse_pgm_header(bytes);
  Mask mask(header.width, header.height);
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    unsigned char v = static_cast<unsigned char>(bytes[header.data_offset + p]);
    if (v != 0 && v != 255) {
      fail(ErrorKind::Parse, "mask PGM contains a value other than {0,255}");
    }
    mask.bits[p] = v ? 1 : 0;
  }
  return mask;
}

}  // namespace boneage
