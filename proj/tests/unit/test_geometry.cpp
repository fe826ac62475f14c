#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "glee/common/error.hpp"
#include "glee/geometry/align.hpp"
#include "glee/geometry/crops.hpp"
#include "support.hpp"

using namespace glee;
using namespace glee::geometry;
using Catch::Approx;

namespace {

std::size_t ceil_frac(std::size_t n, std::size_t num, std::size_t den) {
  return (n * num + den - 1) / den;
}

double mean(const Image& img) {
  double s = 0.0;
  for (float v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size());
}

}  // namespace

TEST_CASE("crop_region matches hand-computed rectangles", "[crops]") {
  CHECK(crop_region("L34", 128, 128) == Rect{0, 128, 0, 96});
  CHECK(crop_region("T12", 128, 128) == Rect{0, 64, 0, 128});
  CHECK(crop_region("BR12", 96, 96) == Rect{48, 96, 48, 96});
  CHECK_THROWS_AS(crop_region("X99", 96, 96), ValidationError);
  CHECK_THROWS_AS(crop_region(CropName::L34, 3, 96), ValidationError);
}

TEST_CASE("crop_region follows the ceil convention on every name", "[crops]") {
  for (std::size_t h : {4u, 7u, 96u, 127u, 176u}) {
    for (std::size_t w : {4u, 9u, 128u, 175u}) {
      const std::size_t r34 = ceil_frac(h, 3, 4), c34 = ceil_frac(w, 3, 4);
      const std::size_t r12 = ceil_frac(h, 1, 2), c12 = ceil_frac(w, 1, 2);
      CHECK(crop_region(CropName::R34, h, w) == Rect{0, h, w - c34, w});
      CHECK(crop_region(CropName::B34, h, w) == Rect{h - r34, h, 0, w});
      CHECK(crop_region(CropName::L12, h, w) == Rect{0, h, 0, c12});
      CHECK(crop_region(CropName::TL34, h, w) == Rect{0, r34, 0, c34});
      CHECK(crop_region(CropName::BR34, h, w) == Rect{h - r34, h, w - c34, w});
      CHECK(crop_region(CropName::TR12, h, w) == Rect{0, r12, w - c12, w});
      CHECK(crop_region(CropName::BL12, h, w) == Rect{h - r12, h, 0, c12});
    }
  }
}

TEST_CASE("single-direction 3/4 crops cover at least 56% and corner halves cover all", "[crops]") {
  for (std::size_t h = 4; h <= 40; h += 3) {
    for (std::size_t w = 4; w <= 40; w += 5) {
      for (CropName n : {CropName::L34, CropName::R34, CropName::T34, CropName::B34}) {
        const Rect r = crop_region(n, h, w);
        CHECK(static_cast<double>(r.rows() * r.cols()) >= 0.56 * static_cast<double>(h * w));
      }
      std::vector<int> covered(h * w, 0);
      for (CropName n : {CropName::TL12, CropName::TR12, CropName::BL12, CropName::BR12}) {
        const Rect r = crop_region(n, h, w);
        for (std::size_t y = r.row_start; y < r.row_end; ++y) {
          for (std::size_t x = r.col_start; x < r.col_end; ++x) covered[y * w + x] = 1;
        }
      }
      CHECK(std::count(covered.begin(), covered.end(), 1) == static_cast<long>(h * w));
    }
  }
}

TEST_CASE("crop names round-trip and mirror pairs are involutions", "[crops]") {
  for (CropName n : kAllCrops) {
    CHECK(parse_crop_name(to_string(n)) == n);
    CHECK(mirrored(mirrored(n)) == n);
  }
  CHECK(mirrored(CropName::L34) == CropName::R34);
  CHECK(mirrored(CropName::TL12) == CropName::TR12);
  CHECK(mirrored(CropName::T12) == CropName::T12);
  CHECK(mirrored(CropName::BR34) == CropName::BL34);
}

TEST_CASE("crop_parts of a constant face is constant", "[crops]") {
  const Image face(176, 176, 3, 0.37f);
  const CropSet crops = crop_parts(face);
  REQUIRE(crops.complete());
  for (CropName n : kAllCrops) {
    const Image& c = crops.get(n);
    CHECK(c.height == kCropSide);
    CHECK(c.width == kCropSide);
    for (float v : c.pixels) REQUIRE(v == Approx(0.37f).margin(1e-7));
  }
}

TEST_CASE("TL12 of a 96 face is the top-left quarter upsampled", "[crops]") {
  Rng rng(3);
  const Image face = test::random_image(96, 96, rng);
  Image quarter(48, 48);
  for (std::size_t r = 0; r < 48; ++r) {
    for (std::size_t c = 0; c < 48; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) quarter.at(r, c, ch) = face.at(r, c, ch);
    }
  }
  const Image expected = resize_bilinear(quarter, 96, 96);
  CHECK(crop_parts(face).get(CropName::TL12) == expected);
}

TEST_CASE("crop means follow a left-to-right gradient", "[crops]") {
  Image face(128, 128);
  for (std::size_t r = 0; r < 128; ++r) {
    for (std::size_t c = 0; c < 128; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) face.at(r, c, ch) = static_cast<float>(c) / 127.0f;
    }
  }
  const CropSet crops = crop_parts(face);
  // Source-rectangle means: cols [0,64) and [64,128).
  CHECK(mean(crops.get(CropName::L12)) == Approx(31.5 / 127.0).margin(2e-3));
  CHECK(mean(crops.get(CropName::R12)) == Approx(95.5 / 127.0).margin(2e-3));
  CHECK(mean(crops.get(CropName::L12)) < mean(crops.get(CropName::R12)));
}

TEST_CASE("crop_parts commutes with mirroring under the name swap", "[crops]") {
  Rng rng(11);
  for (std::size_t side : {96u, 128u, 176u}) {
    const Image face = test::random_image(side, side, rng);
    const CropSet direct = crop_parts(face);
    const CropSet flipped = crop_parts(mirror_horizontal(face));
    for (CropName n : kAllCrops) {
      const Image a = flipped.get(mirrored(n));
      const Image b = mirror_horizontal(direct.get(n));
      double worst = 0.0;
      for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(a.pixels[i] - b.pixels[i])));
      }
      INFO("side " << side << " crop " << to_string(n));
      CHECK(worst <= 1e-6);
    }
  }
}

TEST_CASE("CropSet reports a missing crop by name", "[crops]") {
  CropSet set;
  set.set(CropName::L34, Image(96, 96));
  CHECK_FALSE(set.complete());
  try {
    (void)set.get(CropName::BR12);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("BR12") != std::string::npos);
  }
}

TEST_CASE("alignment at the template is the identity", "[align]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  const LandmarkSet68 lm = test::landmarks_with_anchors(cfg.template_anchors, {176, 176});
  Rng rng(5);
  const Image frame = test::random_image(176, 176, rng);
  const AlignedFace face = align_face(frame, lm, cfg);
  CHECK(face.transform.a == Approx(1.0).margin(1e-12));
  CHECK(face.transform.b == Approx(0.0).margin(1e-12));
  CHECK(face.transform.tx == Approx(0.0).margin(1e-9));
  CHECK(face.transform.ty == Approx(0.0).margin(1e-9));
  REQUIRE(face.pixels.size() == frame.size());
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    REQUIRE(face.pixels.pixels[i] == Approx(frame.pixels[i]).margin(1e-6));
  }
}

TEST_CASE("anchors scaled by 2 give scale 0.5 and no rotation", "[align]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  std::array<Point2, kAnchorCount> doubled = cfg.template_anchors;
  for (Point2& p : doubled) p = {2.0 * p.x, 2.0 * p.y};
  const LandmarkSet68 lm = test::landmarks_with_anchors(doubled, {352, 352});
  const AlignedFace face = align_face(Image(352, 352), lm, cfg);
  CHECK(face.transform.scale() == Approx(0.5).margin(1e-12));
  CHECK(face.transform.rotation() == Approx(0.0).margin(1e-12));
  CHECK(face.pixels.height == 176);
  CHECK(face.pixels.width == 176);
}

TEST_CASE("rotated and shifted anchors land on the template", "[align]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  const double theta = 0.4, s = 1.3, tx = 37.0, ty = -12.0;
  std::array<Point2, kAnchorCount> src{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    const Point2 p = cfg.template_anchors[i];
    src[i] = {s * (std::cos(theta) * p.x - std::sin(theta) * p.y) + tx,
              s * (std::sin(theta) * p.x + std::cos(theta) * p.y) + ty};
  }
  const LandmarkSet68 lm = test::landmarks_with_anchors(src, {300, 300});
  const AlignedFace face = align_face(Image(300, 300), lm, cfg);
  const auto anchors = anchor_points(lm);
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    const Point2 q = face.transform.apply(anchors[i]);
    CHECK(std::hypot(q.x - cfg.template_anchors[i].x, q.y - cfg.template_anchors[i].y) < 0.5);
  }
  CHECK(face.transform.scale() == Approx(1.0 / s).epsilon(1e-9));
  CHECK(face.transform.rotation() == Approx(-theta).margin(1e-9));
}

TEST_CASE("aligning an aligned face is idempotent", "[align]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  Rng rng(9);
  std::array<Point2, kAnchorCount> src{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    src[i] = {cfg.template_anchors[i].x * 1.4 + 20.0 + rng.uniform(-2.0, 2.0),
              cfg.template_anchors[i].y * 1.4 + 15.0 + rng.uniform(-2.0, 2.0)};
  }
  const LandmarkSet68 lm = test::landmarks_with_anchors(src, {320, 320});
  const AlignedFace first = align_face(test::random_image(320, 320, rng), lm, cfg);
  const LandmarkSet68 moved = transform_landmarks(lm, first.transform, {176, 176});
  const AlignedFace second = align_face(first.pixels, moved, cfg);
  CHECK(second.transform.a == Approx(1.0).margin(1e-5));
  CHECK(second.transform.b == Approx(0.0).margin(1e-5));
  CHECK(second.transform.tx == Approx(0.0).margin(1e-5));
  CHECK(second.transform.ty == Approx(0.0).margin(1e-5));
}

TEST_CASE("collinear or coincident anchors are degenerate", "[align]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  std::array<Point2, kAnchorCount> line{};
  for (std::size_t i = 0; i < kAnchorCount; ++i) line[i] = {10.0 + 5.0 * i, 20.0 + 2.5 * i};
  CHECK_THROWS_AS(align_face(Image(100, 100), test::landmarks_with_anchors(line, {100, 100}), cfg),
                  AlignmentDegenerate);
  std::array<Point2, kAnchorCount> point{};
  point.fill({50.0, 50.0});
  CHECK_THROWS_AS(align_face(Image(100, 100), test::landmarks_with_anchors(point, {100, 100}), cfg),
                  AlignmentDegenerate);
}

TEST_CASE("landmark validation rejects far out-of-frame and non-finite points", "[landmarks]") {
  const AlignmentConfig cfg = AlignmentConfig::with_size(176);
  LandmarkSet68 lm = test::landmarks_with_anchors(cfg.template_anchors, {176, 176});
  CHECK_NOTHROW(lm.validate());
  lm.points[5] = {-0.24 * 176, 1.24 * 176};
  CHECK_NOTHROW(lm.validate());
  lm.points[5] = {-0.26 * 176, 10.0};
  CHECK_THROWS_AS(lm.validate(), ValidationError);
  lm.points[5] = {std::nan(""), 10.0};
  CHECK_THROWS_AS(lm.validate(), ValidationError);
}

TEST_CASE("landmark and netpbm files round-trip", "[io]") {
  test::TempDir dir("geom");
  const AlignmentConfig cfg = AlignmentConfig::with_size(128);
  const LandmarkSet68 lm = test::landmarks_with_anchors(cfg.template_anchors, {128, 128});
  write_landmarks(dir.str("a.pts"), lm);
  const LandmarkSet68 back = read_landmarks(dir.str("a.pts"), {128, 128});
  for (std::size_t i = 0; i < kLandmarkCount; ++i) CHECK(back.points[i] == lm.points[i]);

  Image img(5, 7);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i % 256) / 255.0f;
  write_netpbm(dir.str("a.ppm"), img);
  const Image read = read_netpbm(dir.str("a.ppm"));
  REQUIRE(read.size() == img.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(read.pixels[i] == Approx(img.pixels[i]).margin(1e-6));
  CHECK(read_netpbm_size(dir.str("a.ppm")) == ImageSize{5, 7});
}

TEST_CASE("bilinear resize of a linear ramp is exact at the interior", "[image]") {
  Image src(4, 8, 1);
  for (std::size_t c = 0; c < 8; ++c) {
    for (std::size_t r = 0; r < 4; ++r) src.at(r, c, 0) = static_cast<float>(c);
  }
  const Image up = resize_bilinear(src, 4, 16);
  // Output pixel c maps to source coordinate (c + 0.5) / 2 - 0.5.
  for (std::size_t c = 1; c < 15; ++c) {
    CHECK(up.at(1, c, 0) == Approx((c + 0.5) / 2.0 - 0.5).margin(1e-6));
  }
}
