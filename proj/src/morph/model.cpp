#include "glee/morph/model.hpp"

#include <set>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"

namespace glee::morph {

namespace {

constexpr char kMagic[8] = {'G', 'L', 'E', 'E', 'M', 'M', '0', '1'};
constexpr std::uint32_t kModelVersion = 1;

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(i);
  return out;
}

}  // namespace

std::vector<ContourGroup> ibug_contour_groups() {
  return {
      {"jaw", range(0, 17), false},
      {"right_brow", range(17, 22), false},
      {"left_brow", range(22, 27), false},
      {"nose_ridge", range(27, 31), false},
      {"nose_base", range(31, 36), false},
      {"right_eye", range(36, 42), true},
      {"left_eye", range(42, 48), true},
      {"outer_lip", range(48, 60), true},
      {"inner_lip", range(60, 68), true},
  };
}

std::array<bool, geometry::kLandmarkCount> ibug_endpoints() {
  std::array<bool, geometry::kLandmarkCount> e{};
  for (std::size_t i : {0, 16, 17, 21, 22, 26, 27, 30, 31, 35, 36, 39, 42, 45, 48, 54, 60, 64}) {
    e[i] = true;
  }
  return e;
}

void MorphableModel::validate() const {
  const auto v = static_cast<Eigen::Index>(vertex_count());
  if (mean.cols() != 3) throw ValidationError("mean mesh must be V x 3");
  if (vertex_count() < geometry::kLandmarkCount) {
    throw ValidationError("model needs at least 68 vertices");
  }
  if (shape_basis.rows() != 3 * v || expr_basis.rows() != 3 * v) {
    throw ValidationError("basis vertex count does not match the mean mesh");
  }
  std::set<std::size_t> seen;
  for (std::size_t id : landmark_vertex_ids) {
    if (id >= vertex_count()) throw ValidationError("landmark vertex id out of range");
    if (!seen.insert(id).second) throw ValidationError("duplicate landmark vertex id");
  }
  std::array<int, geometry::kLandmarkCount> count{};
  for (const ContourGroup& g : contour_groups) {
    if (g.landmarks.size() < 2) throw ValidationError("contour group " + g.name + " too short");
    for (std::size_t i : g.landmarks) {
      if (i >= geometry::kLandmarkCount) throw ValidationError("contour index out of range");
      ++count[i];
    }
  }
  for (int c : count) {
    if (c != 1) throw ValidationError("contour groups must partition the 68 landmarks");
  }
}

Eigen::MatrixXd synthesize_mesh(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                const Eigen::VectorXd& f_exp) {
  if (static_cast<std::size_t>(f_s.size()) != model.shape_count() ||
      static_cast<std::size_t>(f_exp.size()) != model.expr_count()) {
    throw ValidationError("coefficient length mismatch: got " + std::to_string(f_s.size()) + "/" +
                          std::to_string(f_exp.size()) + ", model has " +
                          std::to_string(model.shape_count()) + "/" +
                          std::to_string(model.expr_count()));
  }
  const Eigen::VectorXd flat = model.shape_basis * f_s + model.expr_basis * f_exp;
  Eigen::MatrixXd mesh = model.mean;
  for (Eigen::Index i = 0; i < mesh.rows(); ++i) {
    mesh(i, 0) += flat(3 * i);
    mesh(i, 1) += flat(3 * i + 1);
    mesh(i, 2) += flat(3 * i + 2);
  }
  return mesh;
}

LandmarkBasis::LandmarkBasis(const MorphableModel& model)
    : mean(geometry::kLandmarkCount, 3),
      shape(3 * geometry::kLandmarkCount, model.shape_basis.cols()),
      expr(3 * geometry::kLandmarkCount, model.expr_basis.cols()) {
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
    const auto v = static_cast<Eigen::Index>(model.landmark_vertex_ids[i]);
    const auto r = static_cast<Eigen::Index>(i);
    mean.row(r) = model.mean.row(v);
    shape.middleRows(3 * r, 3) = model.shape_basis.middleRows(3 * v, 3);
    expr.middleRows(3 * r, 3) = model.expr_basis.middleRows(3 * v, 3);
  }
}

Eigen::MatrixXd LandmarkBasis::positions(const Eigen::VectorXd& f_s,
                                         const Eigen::VectorXd& f_exp) const {
  const Eigen::VectorXd flat = shape * f_s + expr * f_exp;
  Eigen::MatrixXd out = mean;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out(i, 0) += flat(3 * i);
    out(i, 1) += flat(3 * i + 1);
    out(i, 2) += flat(3 * i + 2);
  }
  return out;
}

void save_model(const std::string& path, const MorphableModel& model) {
  model.validate();
  io::ByteWriter w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.vertex_count()));
  w.u32(static_cast<std::uint32_t>(model.shape_count()));
  w.u32(static_cast<std::uint32_t>(model.expr_count()));
  for (Eigen::Index i = 0; i < model.mean.rows(); ++i)
    for (Eigen::Index c = 0; c < 3; ++c) w.f32(static_cast<float>(model.mean(i, c)));
  for (const Eigen::MatrixXd* basis : {&model.shape_basis, &model.expr_basis}) {
    for (Eigen::Index b = 0; b < basis->cols(); ++b)
      for (Eigen::Index r = 0; r < basis->rows(); ++r) w.f32(static_cast<float>((*basis)(r, b)));
  }
  for (std::size_t id : model.landmark_vertex_ids) w.u32(static_cast<std::uint32_t>(id));
  for (bool e : model.endpoint) w.u8(e ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.contour_groups.size()));
  for (const ContourGroup& g : model.contour_groups) {
    w.str(g.name);
    w.u8(g.closed ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(g.landmarks.size()));
    for (std::size_t i : g.landmarks) w.u32(static_cast<std::uint32_t>(i));
  }
  const std::uint64_t sum = io::fnv1a(w.buffer().data(), w.buffer().size());
  w.u64(sum);
  io::write_file_atomic(path, w.buffer());
}

MorphableModel load_model(const std::string& path) {
  const std::vector<unsigned char> blob = io::read_file(path);
  if (blob.size() < sizeof kMagic + 8) throw ValidationError(path + ": model file truncated");
  const std::size_t body = blob.size() - 8;
  if (io::ByteReader(blob.data() + body, 8).u64() != io::fnv1a(blob.data(), body)) {
    throw ValidationError(path + ": model file checksum mismatch");
  }
  io::ByteReader r(blob.data(), body);
  MorphableModel m;
  try {
    char magic[8];
    r.bytes(magic, 8);
    if (std::string_view(magic, 8) != std::string_view(kMagic, 8)) {
      throw ValidationError(path + ": not a morphable model file");
    }
    if (const std::uint32_t v = r.u32(); v != kModelVersion) {
      throw VersionMismatch(path + ": model version " + std::to_string(v));
    }
    const Eigen::Index verts = r.u32();
    const Eigen::Index ns = r.u32();
    const Eigen::Index ne = r.u32();
    if (static_cast<std::size_t>(verts * 3 * (1 + ns + ne)) * 4 > r.remaining()) {
      throw ValidationError(path + ": model arrays truncated");
    }
    m.mean.resize(verts, 3);
    for (Eigen::Index i = 0; i < verts; ++i)
      for (Eigen::Index c = 0; c < 3; ++c) m.mean(i, c) = r.f32();
    m.shape_basis.resize(3 * verts, ns);
    m.expr_basis.resize(3 * verts, ne);
    for (Eigen::MatrixXd* basis : {&m.shape_basis, &m.expr_basis}) {
      for (Eigen::Index b = 0; b < basis->cols(); ++b)
        for (Eigen::Index row = 0; row < basis->rows(); ++row) (*basis)(row, b) = r.f32();
    }
    for (std::size_t& id : m.landmark_vertex_ids) id = r.u32();
    for (bool& e : m.endpoint) e = r.u8() != 0;
    const std::uint32_t groups = r.u32();
    for (std::uint32_t g = 0; g < groups; ++g) {
      ContourGroup cg;
      cg.name = r.str();
      cg.closed = r.u8() != 0;
      const std::uint32_t n = r.u32();
      if (n > geometry::kLandmarkCount) throw ValidationError(path + ": bad contour group size");
      for (std::uint32_t i = 0; i < n; ++i) cg.landmarks.push_back(r.u32());
      m.contour_groups.push_back(std::move(cg));
    }
  } catch (const io::TruncatedInput&) {
    throw ValidationError(path + ": model file truncated");
  }
  m.validate();
  return m;
}

}  // namespace glee::morph
