#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "glee/geometry/align.hpp"
#include "glee/geometry/image.hpp"

namespace glee::geometry {

inline constexpr std::size_t kCropSide = 96;
inline constexpr std::size_t kCropCount = 16;

// Fixed order; the local branch concatenates features in this order.
enum class CropName : std::uint8_t {
  L34, R34, T34, B34,
  L12, R12, T12, B12,
  TL34, TR34, TL12, TR12,
  BL34, BR34, BL12, BR12,
};

inline constexpr std::array<CropName, kCropCount> kAllCrops{
    CropName::L34,  CropName::R34,  CropName::T34,  CropName::B34,
    CropName::L12,  CropName::R12,  CropName::T12,  CropName::B12,
    CropName::TL34, CropName::TR34, CropName::TL12, CropName::TR12,
    CropName::BL34, CropName::BR34, CropName::BL12, CropName::BR12};

std::string_view to_string(CropName name);
// Throws ValidationError on an unknown name.
CropName parse_crop_name(std::string_view name);
// Left/right swap (L34 <-> R34, TL12 <-> TR12, T12 -> T12, ...).
CropName mirrored(CropName name);

// Half-open pixel rectangle.
struct Rect {
  std::size_t row_start = 0, row_end = 0, col_start = 0, col_end = 0;

  std::size_t rows() const { return row_end - row_start; }
  std::size_t cols() const { return col_end - col_start; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Region of an H x W image: *34 keeps ceil(3/4) of the extent on the named
// side(s), *12 keeps ceil(1/2). Requires H, W >= 4.
Rect crop_region(CropName name, std::size_t height, std::size_t width);
Rect crop_region(std::string_view name, std::size_t height, std::size_t width);

Image extract(const Image& img, const Rect& rect);

class CropSet {
 public:
  void set(CropName name, Image crop);
  bool has(CropName name) const;
  bool complete() const;
  // Throws ValidationError naming the missing crop.
  const Image& get(CropName name) const;

 private:
  std::array<std::optional<Image>, kCropCount> crops_;
};

// Extracts all 16 regions and resizes each to 96 x 96.
CropSet crop_parts(const Image& face);
inline CropSet crop_parts(const AlignedFace& face) { return crop_parts(face.pixels); }

}  // namespace glee::geometry
