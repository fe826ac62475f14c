#include "glee/nn/serialize.hpp"

#include <unordered_map>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"

namespace glee::nn {

namespace {
constexpr char kMagic[8] = {'G', 'L', 'E', 'E', 'W', 'T', 'S', '1'};
}

std::vector<unsigned char> encode_weights(const std::vector<NamedTensor>& tensors) {
  io::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& nt : tensors) {
    w.str(nt.name);
    w.u32(static_cast<std::uint32_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : nt.tensor.values()) w.f32(v);
  }
  const auto& buf = w.buffer();
  const std::uint64_t sum = io::fnv1a(buf.data(), buf.size());
  w.u64(sum);
  return w.buffer();
}

std::vector<NamedTensor> decode_weights(const std::vector<unsigned char>& blob) {
  if (blob.size() < sizeof kMagic + 16) throw CorruptCheckpoint("weights blob truncated");
  const std::size_t body = blob.size() - 8;
  io::ByteReader tail(blob.data() + body, 8);
  if (tail.u64() != io::fnv1a(blob.data(), body)) {
    throw CorruptCheckpoint("weights blob checksum mismatch (truncated or corrupted)");
  }
  io::ByteReader r(blob.data(), body);
  std::vector<NamedTensor> out;
  try {
    char magic[8];
    r.bytes(magic, 8);
    if (std::string_view(magic, 8) != std::string_view(kMagic, 8)) {
      throw CorruptCheckpoint("weights blob has bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kWeightsVersion) {
      throw VersionMismatch("weights blob version " + std::to_string(version) + ", expected " +
                            std::to_string(kWeightsVersion));
    }
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      NamedTensor nt;
      nt.name = r.str();
      const std::uint32_t rank = r.u32();
      if (rank > 8) throw CorruptCheckpoint("implausible tensor rank in " + nt.name);
      Shape shape(rank);
      for (auto& d : shape) d = r.u32();
      const std::size_t n = numel(shape);
      if (n * 4 > r.remaining()) throw CorruptCheckpoint("tensor " + nt.name + " truncated");
      std::vector<float> values(n);
      for (float& v : values) v = r.f32();
      nt.tensor = Tensor(std::move(shape), std::move(values));
      out.push_back(std::move(nt));
    }
  } catch (const io::TruncatedInput&) {
    throw CorruptCheckpoint("weights blob truncated");
  }
  if (r.remaining() != 0) throw CorruptCheckpoint("trailing bytes in weights blob");
  return out;
}

void save_weights(const std::string& path, const std::vector<NamedTensor>& tensors) {
  io::write_file_atomic(path, encode_weights(tensors));
}

std::vector<NamedTensor> load_weights(const std::string& path) {
  return decode_weights(io::read_file(path));
}

std::vector<NamedTensor> snapshot(const ParameterList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back({p->name, p->value});
  return out;
}

void assign(const ParameterList& params, const std::vector<NamedTensor>& tensors) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : tensors) by_name[nt.name] = &nt.tensor;
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw CorruptCheckpoint("missing tensor " + p->name);
    if (it->second->shape() != p->value.shape()) {
      throw CorruptCheckpoint("tensor " + p->name + " has shape " + to_string(it->second->shape()) +
                              ", expected " + to_string(p->value.shape()));
    }
    p->value = *it->second;
  }
}

}  // namespace glee::nn
