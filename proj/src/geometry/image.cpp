#include "glee/geometry/image.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <sstream>

#include "glee/common/error.hpp"

namespace glee::geometry {

void sample_bilinear(const Image& img, double x, double y, float* out) {
  const double maxx = static_cast<double>(img.width - 1);
  const double maxy = static_cast<double>(img.height - 1);
  x = std::clamp(x, 0.0, maxx);
  y = std::clamp(y, 0.0, maxy);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  for (std::size_t ch = 0; ch < img.channels; ++ch) {
    const double top = (1.0 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch);
    const double bot = (1.0 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch);
    out[ch] = static_cast<float>((1.0 - fy) * top + fy * bot);
  }
}

Image resize_bilinear(const Image& src, std::size_t out_h, std::size_t out_w) {
  if (src.empty()) throw ValidationError("resize of empty image");
  Image dst(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double y = (static_cast<double>(r) + 0.5) * sy - 0.5;
    for (std::size_t c = 0; c < out_w; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * sx - 0.5;
      sample_bilinear(src, x, y, &dst.at(r, c, 0));
    }
  }
  return dst;
}

Image mirror_horizontal(const Image& src) {
  Image dst(src.height, src.width, src.channels);
  for (std::size_t r = 0; r < src.height; ++r)
    for (std::size_t c = 0; c < src.width; ++c)
      for (std::size_t ch = 0; ch < src.channels; ++ch)
        dst.at(r, src.width - 1 - c, ch) = src.at(r, c, ch);
  return dst;
}

namespace {

struct NetpbmHeader {
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::string& path) {
  NetpbmHeader h;
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  h.magic = next_token();
  if (h.magic != "P5" && h.magic != "P6") {
    throw ValidationError(path + ": unsupported image format (expected binary P5/P6 netpbm)");
  }
  try {
    h.width = std::stoul(next_token());
    h.height = std::stoul(next_token());
    h.maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw ValidationError(path + ": malformed netpbm header");
  }
  if (h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 255) {
    throw ValidationError(path + ": unsupported netpbm dimensions or depth");
  }
  return h;
}

}  // namespace

ImageSize read_netpbm_size(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path);
  const NetpbmHeader h = read_header(in, path);
  return {h.height, h.width};
}

Image read_netpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path);
  const NetpbmHeader h = read_header(in, path);
  const std::size_t src_channels = h.magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(h.width * h.height * src_channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw ValidationError(path + ": truncated pixel data");
  }
  Image img(h.height, h.width, 3);
  const float inv = 1.0f / static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < h.width * h.height; ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const unsigned char v = raw[i * src_channels + (src_channels == 3 ? ch : 0)];
      img.pixels[i * 3 + ch] = static_cast<float>(v) * inv;
    }
  }
  return img;
}

void write_netpbm(const std::string& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) {
    throw ValidationError("netpbm output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write image " + path);
  out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace glee::geometry
