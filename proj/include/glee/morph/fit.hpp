#pragma once

#include <vector>

#include <Eigen/Core>

#include "glee/geometry/landmarks.hpp"
#include "glee/morph/model.hpp"

namespace glee::morph {

// Camera extrinsics (axis-angle rotation, translation) plus fixed pinhole
// intrinsics.
struct PoseParams {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation{0.0, 0.0, 1.0};
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  // Throws ValidationError unless t_z > 0 and focal > 0.
  void validate() const;

  // [rx, ry, rz, tx, ty, tz]
  Eigen::Matrix<double, 6, 1> extrinsics() const;
  void set_extrinsics(const Eigen::Matrix<double, 6, 1>& x);
};

// Rodrigues formula; exact identity for a zero vector.
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& axis_angle);

// Throws BehindCamera when the camera-frame depth is <= 1e-9.
Eigen::Vector2d project_vertex(const Eigen::Vector3d& v, const PoseParams& pose);

struct FitConfig {
  double lambda_e = 1e-4;
  double lambda_s = 1e-4;
  std::size_t lm_max_iters = 100;
  double lm_init_damping = 1e-3;
  double lm_damping_up = 10.0;
  double lm_damping_down = 10.0;
  double convergence_tol = 1e-8;
  double numeric_jacobian_step = 1e-6;
  // LM iterations on plain point-to-point distances before the contour
  // energy, to start inside the right basin. Skipped when lm_max_iters = 0.
  std::size_t warm_start_iters = 30;

  void validate() const;
};

struct FitResult {
  Eigen::VectorXd f_s;
  Eigen::VectorXd f_exp;
  PoseParams pose;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // Cost after initialization and after every accepted step.
  std::vector<double> cost_history;
};

// Residual layout: for each landmark in index order, two entries (dx, dy)
// for contour endpoints or one signed point-to-polyline distance otherwise;
// then sqrt(lambda_e) * f_exp, then sqrt(lambda_s) * f_s. The polyline runs
// through the detected points of the landmark's group within two neighbours
// on either side (wrapping for closed groups).
Eigen::VectorXd landmark_residuals(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                   const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                   const geometry::LandmarkSet68& detected,
                                   const FitConfig& config);

// Jacobian of landmark_residuals with respect to [pose extrinsics(6), f_s,
// f_exp], as used by the fitter.
Eigen::MatrixXd residual_jacobian(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                  const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                  const geometry::LandmarkSet68& detected,
                                  const FitConfig& config);

// Number of residual entries for a model.
std::size_t residual_count(const MorphableModel& model);

// Point-to-polyline residual. The nearest segment is chosen by true
// distance; the value is the signed perpendicular offset from that
// segment's supporting line (positive on its left). It equals the distance
// whenever p projects inside the segment and stays continuous, with a
// continuous gradient along the curve, where plain distance has a cone at
// every vertex.
double signed_polyline_distance(const Eigen::Vector2d& p,
                                const std::vector<Eigen::Vector2d>& pts);

// Identity rotation, focal = image width, principal point at the image
// center, translation matching the projected mean landmark box to the
// detected box. Throws ValidationError on a zero-extent box.
PoseParams init_pose(const MorphableModel& model, const geometry::LandmarkSet68& detected);

// Levenberg-Marquardt over x = [pose extrinsics(6), f_s, f_exp] with a
// forward-difference Jacobian. The initialization is init_pose with zero
// coefficients, refined by the point-to-point warm start; initial_cost and
// the cost history are measured on the contour energy from there.
// converged is set when LM stopped before lm_max_iters (an accepted step
// lowered the cost by less than convergence_tol relative, or no damping up
// to 1e20 gave a descent step) and the final point passes the gradient test
// ||J^T r||_inf < 1e-3 (1 + cost).
FitResult fit_coefficients(const MorphableModel& model, const geometry::LandmarkSet68& detected,
                           const FitConfig& config);

// Projected landmark positions (68 x 2) for given coefficients and pose.
Eigen::MatrixXd project_landmarks(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                  const Eigen::VectorXd& f_exp, const PoseParams& pose);

// Mean point-to-point distance between projected model landmarks and the
// detected ones.
double reprojection_error(const MorphableModel& model, const FitResult& fit,
                          const geometry::LandmarkSet68& detected);

}  // namespace glee::morph
