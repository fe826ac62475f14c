#include "glee/geometry/align.hpp"

#include <cmath>

#include "glee/common/error.hpp"

namespace glee::geometry {

double Similarity::scale() const { return std::hypot(a, b); }

double Similarity::rotation() const { return std::atan2(b, a); }

Point2 Similarity::apply(const Point2& p) const {
  return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
}

Similarity Similarity::inverse() const {
  const double d = a * a + b * b;
  const double ia = a / d, ib = -b / d;
  return {ia, ib, -(ia * tx - ib * ty), -(ib * tx + ia * ty)};
}

Similarity Similarity::compose(const Similarity& o) const {
  return {a * o.a - b * o.b, a * o.b + b * o.a, a * o.tx - b * o.ty + tx, b * o.tx + a * o.ty + ty};
}

std::array<double, 6> Similarity::matrix() const { return {a, -b, tx, b, a, ty}; }

AlignmentConfig AlignmentConfig::with_size(std::size_t canonical_size) {
  // Common five-point face template on a 112 x 112 crop, scaled.
  static constexpr std::array<Point2, kAnchorCount> k112{{{38.2946, 51.6963},
                                                          {73.5318, 51.5014},
                                                          {56.0252, 71.7366},
                                                          {41.5493, 92.3655},
                                                          {70.7299, 92.2041}}};
  AlignmentConfig cfg;
  cfg.canonical_size = canonical_size;
  const double s = static_cast<double>(canonical_size) / 112.0;
  for (std::size_t i = 0; i < kAnchorCount; ++i) {
    cfg.template_anchors[i] = {k112[i].x * s, k112[i].y * s};
  }
  return cfg;
}

std::array<Point2, kAnchorCount> anchor_points(const LandmarkSet68& lm) {
  auto eye_center = [&](std::size_t begin) {
    Point2 c;
    for (std::size_t i = 0; i < ibug::kEyeCount; ++i) {
      c.x += lm.points[begin + i].x;
      c.y += lm.points[begin + i].y;
    }
    c.x /= ibug::kEyeCount;
    c.y /= ibug::kEyeCount;
    return c;
  };
  return {eye_center(ibug::kRightEyeBegin), eye_center(ibug::kLeftEyeBegin),
          lm.points[ibug::kNoseTip], lm.points[ibug::kMouthRight], lm.points[ibug::kMouthLeft]};
}

Similarity fit_similarity(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size() || src.size() < 2) {
    throw ValidationError("similarity fit needs two equal point lists of length >= 2");
  }
  const double n = static_cast<double>(src.size());
  Point2 ms, md;
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms.x += src[i].x;
    ms.y += src[i].y;
    md.x += dst[i].x;
    md.y += dst[i].y;
  }
  ms.x /= n;
  ms.y /= n;
  md.x /= n;
  md.y /= n;

  double sxx = 0, syy = 0, sxy = 0, num_a = 0, num_b = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double sx = src[i].x - ms.x, sy = src[i].y - ms.y;
    const double dx = dst[i].x - md.x, dy = dst[i].y - md.y;
    sxx += sx * sx;
    syy += sy * sy;
    sxy += sx * sy;
    num_a += sx * dx + sy * dy;
    num_b += sx * dy - sy * dx;
  }
  // Singular values of the centered source cloud.
  const double tr = sxx + syy;
  const double disc = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) / 4.0 + sxy * sxy));
  const double l_max = tr / 2.0 + disc;
  const double l_min = std::max(0.0, tr / 2.0 - disc);
  if (!(l_max > 0.0) || std::sqrt(l_min / l_max) <= 1e-6) {
    throw AlignmentDegenerate("alignment anchors are collinear or coincident");
  }
  Similarity s;
  s.a = num_a / tr;
  s.b = num_b / tr;
  s.tx = md.x - (s.a * ms.x - s.b * ms.y);
  s.ty = md.y - (s.b * ms.x + s.a * ms.y);
  return s;
}

Image warp_similarity(const Image& frame, const Similarity& to_canonical, std::size_t out_size) {
  const Similarity back = to_canonical.inverse();
  Image out(out_size, out_size, frame.channels);
  for (std::size_t r = 0; r < out_size; ++r) {
    for (std::size_t c = 0; c < out_size; ++c) {
      const Point2 src = back.apply({static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5});
      sample_bilinear(frame, src.x - 0.5, src.y - 0.5, &out.at(r, c, 0));
    }
  }
  return out;
}

AlignedFace align_face(const Image& frame, const LandmarkSet68& landmarks,
                       const AlignmentConfig& config) {
  if (frame.empty()) throw ValidationError("align_face: empty frame");
  if (config.canonical_size == 0) throw ConfigError("align_face: canonical size is zero");
  landmarks.validate();
  const auto anchors = anchor_points(landmarks);
  AlignedFace face;
  face.transform = fit_similarity(anchors, config.template_anchors);
  face.pixels = warp_similarity(frame, face.transform, config.canonical_size);
  return face;
}

LandmarkSet68 transform_landmarks(const LandmarkSet68& landmarks, const Similarity& t,
                                  ImageSize new_size) {
  LandmarkSet68 out;
  out.image_size = new_size;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) out.points[i] = t.apply(landmarks.points[i]);
  return out;
}

}  // namespace glee::geometry
