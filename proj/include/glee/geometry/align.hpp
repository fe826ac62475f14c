#pragma once

#include <array>
#include <span>

#include "glee/geometry/image.hpp"
#include "glee/geometry/landmarks.hpp"

namespace glee::geometry {

// p' = [a -b; b a] p + t. Maps source-frame coordinates to canonical ones.
struct Similarity {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  double scale() const;
  double rotation() const;  // radians
  Point2 apply(const Point2& p) const;
  Similarity inverse() const;
  // (this * other)(p) = this(other(p))
  Similarity compose(const Similarity& other) const;

  // 2x3 row-major [a -b tx; b a ty]
  std::array<double, 6> matrix() const;
};

inline constexpr std::size_t kAnchorCount = 5;

struct AlignmentConfig {
  std::size_t canonical_size = 176;
  // Canonical positions of: right-eye center, left-eye center, nose tip,
  // right mouth corner, left mouth corner (image-left first).
  std::array<Point2, kAnchorCount> template_anchors{};

  static AlignmentConfig with_size(std::size_t canonical_size);
};

struct AlignedFace {
  Image pixels;
  Similarity transform;
};

// Eye centers (means of the six per-eye points), nose tip, mouth corners.
std::array<Point2, kAnchorCount> anchor_points(const LandmarkSet68& landmarks);

// Least-squares similarity taking src onto dst. Throws AlignmentDegenerate
// when src is collinear (singular-value ratio <= 1e-6) or coincident.
Similarity fit_similarity(std::span<const Point2> src, std::span<const Point2> dst);

Image warp_similarity(const Image& frame, const Similarity& to_canonical, std::size_t out_size);

AlignedFace align_face(const Image& frame, const LandmarkSet68& landmarks,
                       const AlignmentConfig& config);

// Landmarks mapped through a similarity into the canonical frame.
LandmarkSet68 transform_landmarks(const LandmarkSet68& landmarks, const Similarity& t,
                                  ImageSize new_size);

}  // namespace glee::geometry
