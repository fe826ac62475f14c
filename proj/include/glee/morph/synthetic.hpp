#pragma once

// Procedural morphable model and landmark scenes for testing the fitter
// without licensed model data.

#include <cstdint>

#include "glee/common/rng.hpp"
#include "glee/morph/fit.hpp"
#include "glee/morph/model.hpp"

namespace glee::morph {

struct SyntheticModelConfig {
  std::size_t extra_vertices = 232;
  std::size_t shape_count = kShapeCount;
  std::size_t expr_count = kExprCount;
  // Rank of the shape deformations that reach the landmark vertices.
  std::size_t visible_shape_rank = 10;
  // Largest vertex displacement produced by a unit coefficient; a
  // coefficient of 3 gives the extreme deformation.
  double unit_amplitude = 0.1;
  // Reference camera used to shape the landmark displacements.
  std::size_t image_size = 256;
  double reference_depth = 3.66;
  std::uint64_t seed = 7;
};

// iBUG-68 mean layout in model units (x right, y down, z away from camera),
// centered near the origin, 68 x 3.
Eigen::MatrixXd mean_landmark_layout();

// Landmark vertices come first (ids 0..67). Expression displacements at the
// landmarks are orthogonal to each other, to the visible shape subspace and
// to the first-order pose motion, all measured in the directions a fit can
// observe (both axes for contour endpoints, the contour normal otherwise).
MorphableModel make_synthetic_model(const SyntheticModelConfig& config = {});

struct SceneConfig {
  double coefficient_bound = 1.0;
  double max_rotation = 0.2;  // per axis-angle component, radians
  double max_shift = 0.15;    // model units in x and y
  double depth_jitter = 0.08; // relative
  double reference_depth = 3.66;
  std::size_t image_size = 256;
};

struct SyntheticScene {
  Eigen::VectorXd f_s;
  Eigen::VectorXd f_exp;
  PoseParams pose;
  geometry::LandmarkSet68 landmarks;
};

// Uniform coefficients in [-bound, bound] and a random mild pose; the
// landmarks are the exact projections.
SyntheticScene make_scene(const MorphableModel& model, const SceneConfig& config, Rng& rng);

// Projection of given coefficients and pose as a landmark set.
geometry::LandmarkSet68 render_landmarks(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                         const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                         geometry::ImageSize size);

}  // namespace glee::morph
