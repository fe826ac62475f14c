#pragma once

#include <array>
#include <string>

#include "glee/geometry/image.hpp"

namespace glee::geometry {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline constexpr std::size_t kLandmarkCount = 68;

// iBUG-68 landmarks in continuous pixel coordinates of the source frame.
struct LandmarkSet68 {
  std::array<Point2, kLandmarkCount> points{};
  ImageSize image_size{};

  // Finite coordinates inside [-0.25 W, 1.25 W] x [-0.25 H, 1.25 H].
  void validate() const;
};

// One "x y" pair per line, 68 lines.
LandmarkSet68 read_landmarks(const std::string& path, ImageSize image_size);
void write_landmarks(const std::string& path, const LandmarkSet68& landmarks);

// iBUG-68 index ranges used by alignment.
namespace ibug {
inline constexpr std::size_t kRightEyeBegin = 36;  // subject's right eye, image left
inline constexpr std::size_t kLeftEyeBegin = 42;
inline constexpr std::size_t kEyeCount = 6;
inline constexpr std::size_t kNoseTip = 30;
inline constexpr std::size_t kMouthRight = 48;  // image left corner
inline constexpr std::size_t kMouthLeft = 54;
}  // namespace ibug

}  // namespace glee::geometry
