#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glee/geometry/landmarks.hpp"

namespace glee::morph {

inline constexpr std::size_t kShapeCount = 60;
inline constexpr std::size_t kExprCount = 51;
inline constexpr std::size_t kPoseDim = 6;

// A polyline through landmark indices. Closed groups wrap around.
struct ContourGroup {
  std::string name;
  std::vector<std::size_t> landmarks;
  bool closed = false;
};

// The iBUG-68 partition: jaw, brows, nose ridge, nose base, eyes (closed),
// outer and inner lips (closed).
std::vector<ContourGroup> ibug_contour_groups();

// Landmarks scored point-to-point: ends of the open groups plus eye and
// mouth corners of the closed ones.
std::array<bool, geometry::kLandmarkCount> ibug_endpoints();

// Linear face model M = M0 + S f_s + E f_exp. Bases are stored as columns of
// flattened (x0, y0, z0, x1, ...) vertex displacements.
struct MorphableModel {
  Eigen::MatrixXd mean;         // V x 3
  Eigen::MatrixXd shape_basis;  // 3V x N_s
  Eigen::MatrixXd expr_basis;   // 3V x N_e
  std::array<std::size_t, geometry::kLandmarkCount> landmark_vertex_ids{};
  std::vector<ContourGroup> contour_groups;
  std::array<bool, geometry::kLandmarkCount> endpoint{};

  std::size_t vertex_count() const { return static_cast<std::size_t>(mean.rows()); }
  std::size_t shape_count() const { return static_cast<std::size_t>(shape_basis.cols()); }
  std::size_t expr_count() const { return static_cast<std::size_t>(expr_basis.cols()); }

  // Throws ValidationError on inconsistent dimensions, duplicate or
  // out-of-range landmark vertices, or a non-partition contour layout.
  void validate() const;
};

// V x 3 mesh for the given coefficients.
Eigen::MatrixXd synthesize_mesh(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                const Eigen::VectorXd& f_exp);

// Model rows restricted to the 68 landmark vertices, for fast residuals.
struct LandmarkBasis {
  Eigen::MatrixXd mean;   // 68 x 3
  Eigen::MatrixXd shape;  // 204 x N_s
  Eigen::MatrixXd expr;   // 204 x N_e

  explicit LandmarkBasis(const MorphableModel& model);

  // 68 x 3 landmark vertex positions.
  Eigen::MatrixXd positions(const Eigen::VectorXd& f_s, const Eigen::VectorXd& f_exp) const;
};

// Binary layout, little-endian:
//   magic "GLEEMM01", u32 version, u32 V, u32 N_s, u32 N_e
//   f32 mean[V*3], f32 shape[N_s][V*3], f32 expr[N_e][V*3]   (row-major)
//   u32 landmark_vertex_ids[68], u8 endpoint[68]
//   u32 group count; per group: str name, u8 closed, u32 n, u32 ids[n]
//   u64 FNV-1a checksum of every preceding byte
void save_model(const std::string& path, const MorphableModel& model);
MorphableModel load_model(const std::string& path);

}  // namespace glee::morph
