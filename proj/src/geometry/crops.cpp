#include "glee/geometry/crops.hpp"

#include <string>

#include "glee/common/error.hpp"

namespace glee::geometry {

namespace {

constexpr std::array<std::string_view, kCropCount> kNames{
    "L34",  "R34",  "T34",  "B34",  "L12",  "R12",  "T12",  "B12",
    "TL34", "TR34", "TL12", "TR12", "BL34", "BR34", "BL12", "BR12"};

std::size_t index(CropName n) { return static_cast<std::size_t>(n); }

// ceil(num/den * extent) in integer arithmetic.
std::size_t ceil_fraction(std::size_t extent, std::size_t num, std::size_t den) {
  return (extent * num + den - 1) / den;
}

}  // namespace

std::string_view to_string(CropName name) { return kNames[index(name)]; }

CropName parse_crop_name(std::string_view name) {
  for (std::size_t i = 0; i < kCropCount; ++i) {
    if (kNames[i] == name) return kAllCrops[i];
  }
  throw ValidationError("unknown crop name '" + std::string(name) + "'");
}

CropName mirrored(CropName name) {
  std::string s(to_string(name));
  for (char& c : s) {
    if (c == 'L') c = 'R';
    else if (c == 'R') c = 'L';
  }
  return parse_crop_name(s);
}

Rect crop_region(CropName name, std::size_t height, std::size_t width) {
  if (height < 4 || width < 4) {
    throw ValidationError("crop_region needs an image of at least 4x4");
  }
  const std::string_view s = to_string(name);
  const bool three_quarter = s.ends_with("34");
  const std::size_t num = three_quarter ? 3 : 1;
  const std::size_t den = three_quarter ? 4 : 2;
  const std::size_t kh = ceil_fraction(height, num, den);
  const std::size_t kw = ceil_fraction(width, num, den);
  const std::string_view sides = s.substr(0, s.size() - 2);

  Rect r{0, height, 0, width};
  for (char side : sides) {
    switch (side) {
      case 'L': r.col_start = 0; r.col_end = kw; break;
      case 'R': r.col_start = width - kw; r.col_end = width; break;
      case 'T': r.row_start = 0; r.row_end = kh; break;
      case 'B': r.row_start = height - kh; r.row_end = height; break;
      default: throw ValidationError("bad crop side in " + std::string(s));
    }
  }
  return r;
}

Rect crop_region(std::string_view name, std::size_t height, std::size_t width) {
  return crop_region(parse_crop_name(name), height, width);
}

Image extract(const Image& img, const Rect& rect) {
  if (rect.row_end > img.height || rect.col_end > img.width || rect.rows() == 0 ||
      rect.cols() == 0) {
    throw ValidationError("crop rectangle outside image");
  }
  Image out(rect.rows(), rect.cols(), img.channels);
  for (std::size_t r = 0; r < rect.rows(); ++r) {
    const float* src = &img.pixels[((rect.row_start + r) * img.width + rect.col_start) * img.channels];
    std::copy(src, src + rect.cols() * img.channels, &out.pixels[r * rect.cols() * img.channels]);
  }
  return out;
}

void CropSet::set(CropName name, Image crop) {
  if (crop.height != kCropSide || crop.width != kCropSide || crop.channels != 3) {
    throw ValidationError("crop " + std::string(to_string(name)) + " must be 96x96x3");
  }
  crops_[index(name)] = std::move(crop);
}

bool CropSet::has(CropName name) const { return crops_[index(name)].has_value(); }

bool CropSet::complete() const {
  for (const auto& c : crops_) {
    if (!c) return false;
  }
  return true;
}

const Image& CropSet::get(CropName name) const {
  const auto& c = crops_[index(name)];
  if (!c) throw ValidationError("crop " + std::string(to_string(name)) + " is missing");
  return *c;
}

CropSet crop_parts(const Image& face) {
  if (face.empty() || face.channels != 3) throw ValidationError("crop_parts needs an RGB face");
  CropSet set;
  for (CropName n : kAllCrops) {
    const Rect r = crop_region(n, face.height, face.width);
    set.set(n, resize_bilinear(extract(face, r), kCropSide, kCropSide));
  }
  return set;
}

}  // namespace glee::geometry
