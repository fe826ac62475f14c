#include "glee/morph/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include "glee/common/error.hpp"

namespace glee::morph {

void PoseParams::validate() const {
  if (!(translation.z() > 0.0)) throw ValidationError("pose: t_z must be positive");
  if (!(focal > 0.0)) throw ValidationError("pose: focal must be positive");
}

Eigen::Matrix<double, 6, 1> PoseParams::extrinsics() const {
  Eigen::Matrix<double, 6, 1> x;
  x << rotation, translation;
  return x;
}

void PoseParams::set_extrinsics(const Eigen::Matrix<double, 6, 1>& x) {
  rotation = x.head<3>();
  translation = x.tail<3>();
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

namespace {

Eigen::Vector2d project_camera(const Eigen::Vector3d& p, const PoseParams& pose) {
  if (!(p.z() > 1e-9)) throw BehindCamera("vertex projects behind the camera");
  return {pose.focal * p.x() / p.z() + pose.cx, pose.focal * p.y() / p.z() + pose.cy};
}

}  // namespace

Eigen::Vector2d project_vertex(const Eigen::Vector3d& v, const PoseParams& pose) {
  return project_camera(rotation_matrix(pose.rotation) * v + pose.translation, pose);
}

void FitConfig::validate() const {
  if (!(lambda_e > 0.0 && lambda_s > 0.0)) throw ConfigError("fit: lambdas must be positive");
  if (!(lm_init_damping > 0.0 && lm_damping_up > 1.0 && lm_damping_down > 1.0)) {
    throw ConfigError("fit: damping must be positive with up/down factors > 1");
  }
  if (!(convergence_tol > 0.0 && numeric_jacobian_step > 0.0)) {
    throw ConfigError("fit: tolerances must be positive");
  }
}

namespace {

// Value and gradient (w.r.t. p) of the point-to-polyline residual.
double curve_residual(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& pts,
                      Eigen::Vector2d* grad) {
  if (pts.empty()) throw ValidationError("polyline has no points");
  double best = std::numeric_limits<double>::infinity();
  double value = 0.0;
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  auto point_term = [&](const Eigen::Vector2d& a) {
    const double dist = (p - a).norm();
    if (dist < best) {
      best = value = dist;
      g = dist > 0.0 ? Eigen::Vector2d((p - a) / dist) : Eigen::Vector2d::Zero();
    }
  };
  if (pts.size() == 1) point_term(pts[0]);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Eigen::Vector2d a = pts[i];
    const Eigen::Vector2d d = pts[i + 1] - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) {
      point_term(a);
      continue;
    }
    const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    const double dist = (p - (a + t * d)).norm();
    if (dist < best) {
      best = dist;
      const double len = std::sqrt(len2);
      g = Eigen::Vector2d(-d.y(), d.x()) / len;
      value = g.dot(p - a);
    }
  }
  if (grad != nullptr) *grad = g;
  return value;
}

}  // namespace

double signed_polyline_distance(const Eigen::Vector2d& p,
                                const std::vector<Eigen::Vector2d>& pts) {
  return curve_residual(p, pts, nullptr);
}

namespace {

struct LandmarkTerm {
  bool endpoint = false;
  // Detected points forming the local polyline, for curve terms.
  std::vector<Eigen::Vector2d> curve;
};

// Precomputed per-fit data: landmark-restricted bases and local curves.
class Problem {
 public:
  // point_to_point scores every landmark against its own detected point.
  Problem(const MorphableModel& model, const geometry::LandmarkSet68& detected,
          const FitConfig& config, bool point_to_point = false)
      : basis_(model), config_(config) {
    model.validate();
    detected.validate();
    ns_ = basis_.shape.cols();
    ne_ = basis_.expr.cols();
    terms_.resize(geometry::kLandmarkCount);
    for (const ContourGroup& g : model.contour_groups) {
      const auto n = static_cast<std::ptrdiff_t>(g.landmarks.size());
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        LandmarkTerm& term = terms_[g.landmarks[static_cast<std::size_t>(k)]];
        term.endpoint = point_to_point || model.endpoint[g.landmarks[static_cast<std::size_t>(k)]];
        if (term.endpoint) continue;
        for (std::ptrdiff_t o = -2; o <= 2; ++o) {
          std::ptrdiff_t j = k + o;
          if (g.closed) {
            j = ((j % n) + n) % n;
          } else if (j < 0 || j >= n) {
            continue;
          }
          const auto& pt = detected.points[g.landmarks[static_cast<std::size_t>(j)]];
          term.curve.emplace_back(pt.x, pt.y);
        }
      }
    }
    for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
      detected_[i] = {detected.points[i].x, detected.points[i].y};
      rows_ += terms_[i].endpoint ? 2 : 1;
    }
    rows_ += ne_ + ns_;
  }

  Eigen::Index params() const { return 6 + ns_ + ne_; }
  Eigen::Index rows() const { return rows_; }

  // Flattened 3D landmark positions (204) for the coefficient part of x.
  Eigen::VectorXd positions(const Eigen::VectorXd& x) const {
    Eigen::VectorXd flat = basis_.shape * x.segment(6, ns_) + basis_.expr * x.segment(6 + ns_, ne_);
    for (Eigen::Index i = 0; i < basis_.mean.rows(); ++i) {
      flat.segment<3>(3 * i) += basis_.mean.row(i).transpose();
    }
    return flat;
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x, const PoseParams& intrinsics) const {
    return assemble(x, project(x, positions(x), intrinsics), nullptr);
  }

  // Projected landmarks (68 x 2, flattened) for pose x.head(6).
  Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& flat,
                          const PoseParams& intrinsics) const {
    PoseParams pose = intrinsics;
    pose.set_extrinsics(x.head<6>());
    const Eigen::Matrix3d rot = rotation_matrix(pose.rotation);
    Eigen::VectorXd out(2 * static_cast<Eigen::Index>(geometry::kLandmarkCount));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(geometry::kLandmarkCount); ++i) {
      out.segment<2>(2 * i) = project_camera(rot * flat.segment<3>(3 * i) + pose.translation, pose);
    }
    return out;
  }

  // Residuals from projected points; grads receives, per curve term, the
  // residual gradient with respect to the projected point.
  Eigen::VectorXd assemble(const Eigen::VectorXd& x, const Eigen::VectorXd& proj,
                           std::vector<Eigen::Vector2d>* grads) const {
    Eigen::VectorXd r(rows_);
    Eigen::Index row = 0;
    if (grads != nullptr) grads->assign(geometry::kLandmarkCount, Eigen::Vector2d::Zero());
    for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
      const Eigen::Vector2d p = proj.segment<2>(2 * static_cast<Eigen::Index>(i));
      if (terms_[i].endpoint) {
        r.segment<2>(row) = p - detected_[i];
        row += 2;
      } else {
        r(row++) = curve_residual(p, terms_[i].curve, grads != nullptr ? &(*grads)[i] : nullptr);
      }
    }
    r.segment(row, ne_) = std::sqrt(config_.lambda_e) * x.segment(6 + ns_, ne_);
    row += ne_;
    r.segment(row, ns_) = std::sqrt(config_.lambda_s) * x.segment(6, ns_);
    return r;
  }

  // Forward differences of the projected landmarks, chained with the exact
  // derivative of each residual with respect to its projected point, so a
  // difference step never straddles two polyline segments.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const PoseParams& intrinsics) const {
    const Eigen::VectorXd flat = positions(x);
    const Eigen::VectorXd proj = project(x, flat, intrinsics);
    std::vector<Eigen::Vector2d> grads;
    assemble(x, proj, &grads);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows_, params());
    for (Eigen::Index j = 0; j < params(); ++j) {
      const double h = config_.numeric_jacobian_step * std::max(1.0, std::abs(x(j)));
      Eigen::VectorXd xp = x;
      xp(j) += h;
      const double step = xp(j) - x(j);
      Eigen::VectorXd pp;
      if (j < 6) {
        pp = project(xp, flat, intrinsics);
      } else if (j < 6 + ns_) {
        pp = project(xp, flat + step * basis_.shape.col(j - 6), intrinsics);
      } else {
        pp = project(xp, flat + step * basis_.expr.col(j - 6 - ns_), intrinsics);
      }
      const Eigen::VectorXd dp = (pp - proj) / step;
      Eigen::Index row = 0;
      for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
        const Eigen::Vector2d d = dp.segment<2>(2 * static_cast<Eigen::Index>(i));
        if (terms_[i].endpoint) {
          jac.block<2, 1>(row, j) = d;
          row += 2;
        } else {
          jac(row++, j) = grads[i].dot(d);
        }
      }
    }
    const Eigen::Index reg = rows_ - ne_ - ns_;
    for (Eigen::Index k = 0; k < ne_; ++k) jac(reg + k, 6 + ns_ + k) = std::sqrt(config_.lambda_e);
    for (Eigen::Index k = 0; k < ns_; ++k) jac(reg + ne_ + k, 6 + k) = std::sqrt(config_.lambda_s);
    return jac;
  }

  Eigen::Index shape_count() const { return ns_; }
  Eigen::Index expr_count() const { return ne_; }

 private:
  LandmarkBasis basis_;
  FitConfig config_;
  Eigen::Index ns_ = 0, ne_ = 0, rows_ = 0;
  std::vector<LandmarkTerm> terms_;
  std::array<Eigen::Vector2d, geometry::kLandmarkCount> detected_;
};

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

std::size_t residual_count(const MorphableModel& model) {
  std::size_t n = model.shape_count() + model.expr_count();
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) n += model.endpoint[i] ? 2 : 1;
  return n;
}

Eigen::VectorXd landmark_residuals(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                   const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                   const geometry::LandmarkSet68& detected,
                                   const FitConfig& config) {
  if (static_cast<std::size_t>(f_s.size()) != model.shape_count() ||
      static_cast<std::size_t>(f_exp.size()) != model.expr_count()) {
    throw ValidationError("landmark_residuals: coefficient length mismatch");
  }
  pose.validate();
  const Problem problem(model, detected, config);
  Eigen::VectorXd x(problem.params());
  x << pose.extrinsics(), f_s, f_exp;
  return problem.residuals(x, pose);
}

Eigen::MatrixXd residual_jacobian(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                  const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                  const geometry::LandmarkSet68& detected,
                                  const FitConfig& config) {
  if (static_cast<std::size_t>(f_s.size()) != model.shape_count() ||
      static_cast<std::size_t>(f_exp.size()) != model.expr_count()) {
    throw ValidationError("residual_jacobian: coefficient length mismatch");
  }
  pose.validate();
  const Problem problem(model, detected, config);
  Eigen::VectorXd x(problem.params());
  x << pose.extrinsics(), f_s, f_exp;
  return problem.jacobian(x, pose);
}

PoseParams init_pose(const MorphableModel& model, const geometry::LandmarkSet68& detected) {
  detected.validate();
  const auto& size = detected.image_size;
  if (size.width == 0 || size.height == 0) throw ValidationError("init_pose: empty image size");
  Eigen::Vector2d dmin = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d dmax = -dmin;
  for (const auto& p : detected.points) {
    dmin = dmin.cwiseMin(Eigen::Vector2d(p.x, p.y));
    dmax = dmax.cwiseMax(Eigen::Vector2d(p.x, p.y));
  }
  const Eigen::Vector2d dext = dmax - dmin;
  if (!(dext.x() > 0.0 && dext.y() > 0.0)) {
    throw ValidationError("init_pose: detected landmarks have a zero-extent bounding box");
  }
  const LandmarkBasis basis(model);
  const Eigen::Vector3d mmin = basis.mean.colwise().minCoeff();
  const Eigen::Vector3d mmax = basis.mean.colwise().maxCoeff();
  const Eigen::Vector3d mext = mmax - mmin;
  const double zbar = basis.mean.col(2).mean();

  PoseParams pose;
  pose.focal = static_cast<double>(size.width);
  pose.cx = static_cast<double>(size.width) / 2.0;
  pose.cy = static_cast<double>(size.height) / 2.0;
  const double ratio = 0.5 * (mext.x() / dext.x() + mext.y() / dext.y());
  const double depth = pose.focal * ratio;
  const double tz = depth - zbar;
  if (!(tz > 0.0)) throw ValidationError("init_pose: face too large for the camera model");
  const Eigen::Vector2d dc = 0.5 * (dmin + dmax);
  const Eigen::Vector3d mc = 0.5 * (mmin + mmax);
  pose.translation = {(dc.x() - pose.cx) * depth / pose.focal - mc.x(),
                      (dc.y() - pose.cy) * depth / pose.focal - mc.y(), tz};
  return pose;
}

namespace {

struct LmOutcome {
  std::size_t iterations = 0;
  // Stopped on the cost tolerance or because no damping gave a descent step.
  bool settled = false;
};

// Runs LM from x (updated in place, with r and cost kept current). Accepted
// costs are appended to history when given.
LmOutcome run_lm(const Problem& problem, const PoseParams& intrinsics, const FitConfig& config,
                 std::size_t max_iters, Eigen::VectorXd& x, Eigen::VectorXd& r, double& cost,
                 std::vector<double>* history) {
  LmOutcome out;
  double mu = config.lm_init_damping;
  bool stop = false;
  if (cost == 0.0) out.settled = true;
  while (!stop && out.iterations < max_iters && cost > 0.0) {
    ++out.iterations;
    const Eigen::MatrixXd jac = problem.jacobian(x, intrinsics);
    if (!all_finite(jac)) throw NumericalError("fit: Jacobian is not finite");
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    for (;;) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * jtj.diagonal();
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      bool accepted = false;
      if (delta.allFinite()) {
        const Eigen::VectorXd xn = x + delta;
        try {
          const Eigen::VectorXd rn = problem.residuals(xn, intrinsics);
          const double cn = rn.squaredNorm();
          if (std::isfinite(cn) && cn < cost) {
            const double rel = (cost - cn) / cost;
            x = xn;
            r = rn;
            cost = cn;
            if (history != nullptr) history->push_back(cost);
            mu = std::max(mu / config.lm_damping_down, 1e-12);
            accepted = true;
            if (rel < config.convergence_tol) stop = true;
          }
        } catch (const BehindCamera&) {
        }
      }
      if (accepted) break;
      mu *= config.lm_damping_up;
      if (mu > 1e20) {
        stop = true;
        break;
      }
    }
  }
  out.settled = out.settled || stop || cost == 0.0;
  return out;
}

}  // namespace

FitResult fit_coefficients(const MorphableModel& model, const geometry::LandmarkSet68& detected,
                           const FitConfig& config) {
  config.validate();
  const Problem problem(model, detected, config);
  const PoseParams init = init_pose(model, detected);
  const Eigen::Index ns = problem.shape_count();
  const Eigen::Index ne = problem.expr_count();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.params());
  x.head<6>() = init.extrinsics();
  if (config.lm_max_iters > 0 && config.warm_start_iters > 0) {
    const Problem nominal(model, detected, config, true);
    Eigen::VectorXd r = nominal.residuals(x, init);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw NumericalError("fit: initial cost is not finite");
    run_lm(nominal, init, config, config.warm_start_iters, x, r, cost, nullptr);
  }
  Eigen::VectorXd r = problem.residuals(x, init);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw NumericalError("fit: initial cost is not finite");

  FitResult result;
  result.initial_cost = cost;
  result.cost_history.push_back(cost);
  const LmOutcome lm =
      run_lm(problem, init, config, config.lm_max_iters, x, r, cost, &result.cost_history);
  result.iterations = lm.iterations;

  result.pose = init;
  result.pose.set_extrinsics(x.head<6>());
  result.f_s = x.segment(6, ns);
  result.f_exp = x.segment(6 + ns, ne);
  result.final_cost = cost;
  if (config.lm_max_iters > 0 && lm.settled) {
    const Eigen::MatrixXd jac = problem.jacobian(x, init);
    const double gnorm = (jac.transpose() * r).lpNorm<Eigen::Infinity>();
    result.converged = std::isfinite(gnorm) && gnorm < 1e-3 * (1.0 + cost);
  }
  return result;
}

Eigen::MatrixXd project_landmarks(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                  const Eigen::VectorXd& f_exp, const PoseParams& pose) {
  const Eigen::MatrixXd pts = LandmarkBasis(model).positions(f_s, f_exp);
  const Eigen::Matrix3d rot = rotation_matrix(pose.rotation);
  Eigen::MatrixXd out(pts.rows(), 2);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    out.row(i) = project_camera(rot * pts.row(i).transpose() + pose.translation, pose).transpose();
  }
  return out;
}

double reprojection_error(const MorphableModel& model, const FitResult& fit,
                          const geometry::LandmarkSet68& detected) {
  const Eigen::MatrixXd proj = project_landmarks(model, fit.f_s, fit.f_exp, fit.pose);
  double total = 0.0;
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    total += std::hypot(proj(r, 0) - detected.points[i].x, proj(r, 1) - detected.points[i].y);
  }
  return total / static_cast<double>(geometry::kLandmarkCount);
}

}  // namespace glee::morph
