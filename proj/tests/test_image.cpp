#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "augment.hpp"
#include "error.hpp"
#include "image.hpp"
#include "rng.hpp"

using namespace boneage;

namespace {

// Independent rasterization reference: test every pixel center against the
// polygon with the textbook even-odd crossing count. Same half-open edge
// predicate and same intersection formula as the scanline path, so the two
// must agree bit for bit, boundary centers included.
bool center_inside(const std::vector<Vertex>& polygon, double cx, double cy) {
  int crossings = 0;
  const std::size_t n = polygon.size();
  for (std::size_t e = 0; e < n; ++e) {
    const Vertex& a = polygon[e];
    const Vertex& b = polygon[(e + 1) % n];
    if ((a.y > cy) != (b.y > cy)) {
      double xint = a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y);
      if (xint > cx) {
        ++crossings;
      }
    }
  }
  return crossings % 2 == 1;
}

Mask rasterize_oracle(const std::vector<Vertex>& polygon, int width,
                      int height) {
  Mask mask(width, height);
  for (int j = 0; j < height; ++j) {
    for (int i = 0; i < width; ++i) {
      if (center_inside(polygon, i + 0.5, j + 0.5)) {
        mask.at(i, j) = 1;
      }
    }
  }
  return mask;
}

bool masks_equal(const Mask& a, const Mask& b) {
  return a.width == b.width && a.height == b.height && a.bits == b.bits;
}

GrayImage make_image(int w, int h, const std::vector<double>& values) {
  GrayImage image(w, h);
  image.data = values;
  return image;
}

}  // namespace

TEST_CASE("full-frame rectangle rasters to all ones") {
  const int w = 13, h = 9;
  Mask mask = rasterize(
      {{0, 0}, {double(w), 0}, {double(w), double(h)}, {0, double(h)}}, w, h);
  CHECK(std::count(mask.bits.begin(), mask.bits.end(), 1) == w * h);
}

TEST_CASE("degenerate polygons are rejected") {
  CHECK_THROWS_AS(rasterize({{0, 0}, {5, 5}}, 8, 8), Error);
  try {
    rasterize({{0, 0}, {5, 5}}, 8, 8);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Geometry);
  }
}

TEST_CASE("random triangles match the per-pixel oracle bit for bit") {
  Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vertex> triangle;
    for (int v = 0; v < 3; ++v) {
      triangle.push_back({rng.uniform(0.0, 32.0), rng.uniform(0.0, 32.0)});
    }
    Mask fast = rasterize(triangle, 32, 32);
    Mask slow = rasterize_oracle(triangle, 32, 32);
    REQUIRE(masks_equal(fast, slow));
  }
}

TEST_CASE("random self-intersecting polygons match the oracle too") {
  Rng rng(777);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 4 + static_cast<int>(rng.below(5));
    std::vector<Vertex> polygon;
    for (int v = 0; v < n; ++v) {
      polygon.push_back({rng.uniform(0.0, 24.0), rng.uniform(0.0, 24.0)});
    }
    REQUIRE(masks_equal(rasterize(polygon, 24, 24),
                        rasterize_oracle(polygon, 24, 24)));
  }
}

TEST_CASE("integer-coordinate polygons put centers exactly on edges") {
  // Edges along pixel-center rows/columns exercise the boundary ties.
  std::vector<Vertex> diamond{{4.5, 0.5}, {8.5, 4.5}, {4.5, 8.5}, {0.5, 4.5}};
  CHECK(masks_equal(rasterize(diamond, 9, 9), rasterize_oracle(diamond, 9, 9)));
}

TEST_CASE("union of annotations ORs the member masks") {
  Annotation left;
  left.polygon = {{0, 0}, {4, 0}, {4, 8}, {0, 8}};
  Annotation right;
  right.polygon = {{4, 0}, {8, 0}, {8, 8}, {4, 8}};
  Mask both = rasterize_union({&left, &right}, 8, 8);
  CHECK(std::count(both.bits.begin(), both.bits.end(), 1) == 64);

  Mask a = rasterize(left.polygon, 8, 8);
  Mask b = rasterize(right.polygon, 8, 8);
  Mask manual(8, 8);
  for (std::size_t p = 0; p < manual.bits.size(); ++p) {
    manual.bits[p] = a.bits[p] | b.bits[p];
  }
  CHECK(masks_equal(both, manual));
}

TEST_CASE("apply_mask") {
  GrayImage half(4, 4, 0.5);

  SUBCASE("all-ones mask is the identity") {
    Mask ones(4, 4);
    std::fill(ones.bits.begin(), ones.bits.end(), 1);
    CHECK(apply_mask(half, ones, 0.0).data == half.data);
  }
  SUBCASE("all-zero mask with background 0 blanks the image") {
    Mask zeros(4, 4);
    GrayImage out = apply_mask(half, zeros, 0.0);
    CHECK(std::all_of(out.data.begin(), out.data.end(),
                      [](double v) { return v == 0.0; }));
  }
  SUBCASE("checkerboard keeps kept pixels bitwise equal") {
    Mask board(4, 4);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        board.at(i, j) = (i + j) % 2;
      }
    }
    GrayImage out = apply_mask(half, board, 0.0);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        CHECK(out.at(i, j) == ((i + j) % 2 ? 0.5 : 0.0));
      }
    }
  }
  SUBCASE("dimension mismatch") {
    Mask small(3, 4);
    CHECK_THROWS_AS(apply_mask(half, small, 0.0), Error);
  }
  SUBCASE("background outside [0,1]") {
    Mask ones(4, 4);
    CHECK_THROWS_AS(apply_mask(half, ones, 1.5), Error);
  }
}

TEST_CASE("bounding_box") {
  SUBCASE("single bit at (3,5)") {
    Mask mask(8, 8);
    mask.at(3, 5) = 1;
    auto box = bounding_box(mask);
    REQUIRE(box.has_value());
    CHECK(*box == BoundingBox{3, 5, 4, 6});
  }
  SUBCASE("empty mask") {
    CHECK_FALSE(bounding_box(Mask(8, 8)).has_value());
  }
  SUBCASE("L-shaped blob") {
    // column x=2, rows 1..4, plus row y=4, columns 2..6
    Mask mask(10, 10);
    for (int j = 1; j <= 4; ++j) mask.at(2, j) = 1;
    for (int i = 2; i <= 6; ++i) mask.at(i, 4) = 1;
    auto box = bounding_box(mask);
    REQUIRE(box.has_value());
    CHECK(*box == BoundingBox{2, 1, 7, 5});
  }
}

TEST_CASE("resize") {
  SUBCASE("same-size resize is the identity in both modes") {
    Rng rng(3);
    GrayImage image(7, 5);
    for (double& v : image.data) v = rng.uniform();
    CHECK(resize(image, 7, 5, ResizeMode::Nearest).data == image.data);
    CHECK(resize(image, 7, 5, ResizeMode::Bilinear).data == image.data);
  }
  SUBCASE("2x2 to 4x4 nearest duplicates columns and rows") {
    GrayImage image = make_image(2, 2, {0.0, 1.0, 0.0, 1.0});
    GrayImage out = resize(image, 4, 4, ResizeMode::Nearest);
    for (int j = 0; j < 4; ++j) {
      CHECK(out.at(0, j) == 0.0);
      CHECK(out.at(1, j) == 0.0);
      CHECK(out.at(2, j) == 1.0);
      CHECK(out.at(3, j) == 1.0);
    }
  }
  SUBCASE("constant image stays constant under bilinear") {
    GrayImage image(5, 4, 0.37);
    GrayImage up = resize(image, 13, 9, ResizeMode::Bilinear);
    CHECK(std::all_of(up.data.begin(), up.data.end(),
                      [](double v) { return v == 0.37; }));
  }
  SUBCASE("zero target dimension") {
    CHECK_THROWS_AS(resize(GrayImage(4, 4), 0, 4, ResizeMode::Nearest), Error);
  }
  SUBCASE("values stay in range on random up/downscales") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      GrayImage image(2 + int(rng.below(20)), 2 + int(rng.below(20)));
      for (double& v : image.data) v = rng.uniform();
      GrayImage out = resize(image, 1 + int(rng.below(30)),
                             1 + int(rng.below(30)), ResizeMode::Bilinear);
      for (double v : out.data) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
  }
}

TEST_CASE("PGM encoding") {
  SUBCASE("image round trip is exact at 8-bit quantization") {
    Rng rng(5);
    GrayImage image(6, 3);
    for (double& v : image.data) v = rng.uniform();
    std::string bytes = encode_pgm(image);
    GrayImage back = decode_pgm(bytes);
    CHECK(back.width == 6);
    CHECK(back.height == 3);
    // second encode is byte-identical: quantization is idempotent
    CHECK(encode_pgm(back) == bytes);
    for (std::size_t p = 0; p < image.data.size(); ++p) {
      CHECK(std::abs(back.data[p] - image.data[p]) <= 0.5 / 255.0);
    }
  }
  SUBCASE("mask round trip") {
    Mask mask(5, 4);
    mask.at(1, 1) = 1;
    mask.at(4, 3) = 1;
    Mask back = decode_pgm_mask(encode_pgm(mask));
    CHECK(masks_equal(back, mask));
  }
  SUBCASE("comments and whitespace in the header are tolerated") {
    std::string doc = "P5\n# produced elsewhere\n 2 2\n255\n";
    doc += std::string("\x00\x7f\xff\x40", 4);
    GrayImage image = decode_pgm(doc);
    CHECK(image.width == 2);
    CHECK(image.at(1, 1) == 0x40 / 255.0);
  }
  SUBCASE("parse errors") {
    CHECK_THROWS_AS(decode_pgm("P6\n2 2\n255\n1234"), Error);
    CHECK_THROWS_AS(decode_pgm("P5\n2 2\n255\n12"), Error);       // truncated
    CHECK_THROWS_AS(decode_pgm("P5\n2 2\n65535\n1234"), Error);   // deep PGM
    CHECK_THROWS_AS(decode_pgm(""), Error);
  }
  SUBCASE("mask decode rejects gray values") {
    std::string doc = "P5\n2 1\n255\n";
    doc += static_cast<char>(255);
    doc += static_cast<char>(128);
    CHECK_THROWS_AS(decode_pgm_mask(doc), Error);
  }
}

TEST_CASE("augment spec validation") {
  AugmentSpec ok;
  validate(ok);
  auto expect_config_error = [](AugmentSpec spec) {
    try {
      validate(spec);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
  };
  AugmentSpec bad = ok;
  bad.flip_h = 1.5;
  expect_config_error(bad);
  bad = ok;
  bad.flip_v = -0.1;
  expect_config_error(bad);
  bad = ok;
  bad.max_shift = 0.6;
  expect_config_error(bad);
  bad = ok;
  bad.max_rotate = 181.0;
  expect_config_error(bad);
  bad = ok;
  bad.zoom_range = {1.2, 0.8};
  expect_config_error(bad);
  bad = ok;
  bad.zoom_range = {0.0, 1.0};
  expect_config_error(bad);
  bad = ok;
  bad.brightness_range = {-0.2, 1.0};
  expect_config_error(bad);
}

TEST_CASE("degenerate augment spec is the identity") {
  Rng rng(1);
  GrayImage image(8, 8);
  Rng fill(2);
  for (double& v : image.data) v = fill.uniform();
  CHECK(augment(image, AugmentSpec{}, rng).data == image.data);
}

TEST_CASE("horizontal flip applied twice restores the image") {
  GrayImage image(6, 4);
  Rng fill(9);
  for (double& v : image.data) v = fill.uniform();
  Transform flip;
  flip.flip_h = true;
  GrayImage once = apply_transform(image, flip);
  CHECK(once.data != image.data);
  CHECK(apply_transform(once, flip).data == image.data);
}

TEST_CASE("forced 90-degree rotation of a 2x2 image") {
  // [[a,b],[c,d]] rotated a quarter turn counterclockwise in index space
  // becomes [[c,a],[d,b]].
  const double a = 0.1, b = 0.3, c = 0.6, d = 0.9;
  GrayImage image = make_image(2, 2, {a, b, c, d});
  Transform quarter;
  quarter.rotate_deg = 90.0;
  GrayImage out = apply_transform(image, quarter);
  CHECK(out.at(0, 0) == c);
  CHECK(out.at(1, 0) == a);
  CHECK(out.at(0, 1) == d);
  CHECK(out.at(1, 1) == b);
}

TEST_CASE("flip-only specs preserve the pixel-value histogram") {
  AugmentSpec flips;
  flips.flip_h = 1.0;
  flips.flip_v = 1.0;
  GrayImage image(9, 7);
  Rng fill(21);
  for (double& v : image.data) v = fill.uniform();
  Rng rng(8);
  GrayImage out = augment(image, flips, rng);
  std::multiset<double> before(image.data.begin(), image.data.end());
  std::multiset<double> after(out.data.begin(), out.data.end());
  CHECK(before == after);
}

TEST_CASE("augment is deterministic and stays in range") {
  AugmentSpec spec;
  spec.flip_h = 0.5;
  spec.flip_v = 0.5;
  spec.max_shift = 0.2;
  spec.max_rotate = 30.0;
  spec.zoom_range = {0.8, 1.3};
  spec.brightness_range = {0.5, 1.6};
  validate(spec);

  GrayImage image(16, 16);
  Rng fill(31);
  for (double& v : image.data) v = fill.uniform();

  Rng rng_a(1234);
  Rng rng_b(1234);
  GrayImage out_a = augment(image, spec, rng_a);
  GrayImage out_b = augment(image, spec, rng_b);
  CHECK(out_a.data == out_b.data);

  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    GrayImage out = augment(image, spec, rng);
    for (double v : out.data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("shift moves content the sampled number of pixels") {
  GrayImage image(5, 5);
  image.at(2, 2) = 1.0;
  Transform t;
  t.shift_x = 1.0;
  t.shift_y = -2.0;
  GrayImage out = apply_transform(image, t);
  CHECK(out.at(3, 0) == 1.0);
  CHECK(std::count(out.data.begin(), out.data.end(), 1.0) == 1);
}

TEST_CASE("zoom out pulls in background zeros") {
  GrayImage image(8, 8, 1.0);
  Transform t;
  t.zoom = 0.5;  // shrink content; frame corners now sample out of bounds
  GrayImage out = apply_transform(image, t);
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(4, 4) == 1.0);
}
