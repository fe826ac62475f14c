#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "glee/common/rng.hpp"
#include "glee/geometry/align.hpp"
#include "glee/geometry/image.hpp"

namespace glee::test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("glee_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

inline geometry::Image random_image(std::size_t h, std::size_t w, Rng& rng) {
  geometry::Image img(h, w);
  for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

// 68 landmarks whose five alignment anchors are exactly the given points.
// Eye points all sit on the eye center; the rest scatter around the face.
inline geometry::LandmarkSet68 landmarks_with_anchors(
    const std::array<geometry::Point2, geometry::kAnchorCount>& anchors, geometry::ImageSize size) {
  using namespace geometry;
  LandmarkSet68 lm;
  lm.image_size = size;
  const Point2 mid{(anchors[0].x + anchors[1].x) / 2.0, (anchors[2].y + anchors[3].y) / 2.0};
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const double t = static_cast<double>(i) / kLandmarkCount * 6.283185307179586;
    lm.points[i] = {mid.x + 10.0 * std::cos(t), mid.y + 10.0 * std::sin(t)};
  }
  for (std::size_t i = 0; i < ibug::kEyeCount; ++i) {
    lm.points[ibug::kRightEyeBegin + i] = anchors[0];
    lm.points[ibug::kLeftEyeBegin + i] = anchors[1];
  }
  lm.points[ibug::kNoseTip] = anchors[2];
  lm.points[ibug::kMouthRight] = anchors[3];
  lm.points[ibug::kMouthLeft] = anchors[4];
  return lm;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace glee::test
