#include "glee/common/binary_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include "glee/common/error.hpp"

namespace glee::io {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::string& path, const std::vector<unsigned char>& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw ValidationError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::string& path, std::string_view text) {
  write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace glee::io
