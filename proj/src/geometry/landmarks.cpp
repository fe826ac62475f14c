#include "glee/geometry/landmarks.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "glee/common/error.hpp"

namespace glee::geometry {

void LandmarkSet68::validate() const {
  const double w = static_cast<double>(image_size.width);
  const double h = static_cast<double>(image_size.height);
  if (w <= 0 || h <= 0) throw ValidationError("landmark set has no image size");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError("landmark " + std::to_string(i) + " is not finite");
    }
    if (p.x < -0.25 * w || p.x > 1.25 * w || p.y < -0.25 * h || p.y > 1.25 * h) {
      std::ostringstream os;
      os << "landmark " << i << " (" << p.x << ", " << p.y << ") lies too far outside the "
         << w << "x" << h << " frame";
      throw ValidationError(os.str());
    }
  }
}

LandmarkSet68 read_landmarks(const std::string& path, ImageSize image_size) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open landmark file " + path);
  LandmarkSet68 lm;
  lm.image_size = image_size;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (n == kLandmarkCount) throw ValidationError(path + ": more than 68 landmark lines");
    std::istringstream ls(line);
    Point2 p;
    if (!(ls >> p.x >> p.y)) {
      throw ValidationError(path + ": malformed landmark line " + std::to_string(n + 1));
    }
    lm.points[n++] = p;
  }
  if (n != kLandmarkCount) {
    throw ValidationError(path + ": expected 68 landmarks, found " + std::to_string(n));
  }
  lm.validate();
  return lm;
}

void write_landmarks(const std::string& path, const LandmarkSet68& landmarks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write landmark file " + path);
  out << std::setprecision(17);
  for (const Point2& p : landmarks.points) out << p.x << ' ' << p.y << '\n';
}

}  // namespace glee::geometry
