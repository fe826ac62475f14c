#include "glee/morph/synthetic.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "glee/common/error.hpp"

namespace glee::morph {

namespace {

constexpr double kPi = std::numbers::pi;

void ellipse(Eigen::MatrixXd& out, std::size_t first, double cx, double cy, double a, double b,
             double z, std::initializer_list<double> angles) {
  std::size_t i = first;
  for (double phi : angles) {
    out.row(static_cast<Eigen::Index>(i++)) << cx + a * std::cos(phi), cy - b * std::sin(phi), z;
  }
}

// Landmark coordinates a fit observes, as unit image directions.
struct Observation {
  std::size_t landmark;
  Eigen::Vector2d direction;
};

std::vector<Observation> observations(const MorphableModel& model) {
  std::vector<Observation> obs;
  std::array<Eigen::Vector2d, geometry::kLandmarkCount> normal;
  for (const ContourGroup& g : model.contour_groups) {
    const auto n = static_cast<std::ptrdiff_t>(g.landmarks.size());
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      auto at = [&](std::ptrdiff_t j) {
        if (g.closed) j = ((j % n) + n) % n;
        j = std::clamp<std::ptrdiff_t>(j, 0, n - 1);
        const auto id = static_cast<Eigen::Index>(g.landmarks[static_cast<std::size_t>(j)]);
        return Eigen::Vector2d(model.mean(id, 0), model.mean(id, 1));
      };
      const Eigen::Vector2d t = (at(k + 1) - at(k - 1)).normalized();
      normal[g.landmarks[static_cast<std::size_t>(k)]] = {-t.y(), t.x()};
    }
  }
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
    if (model.endpoint[i]) {
      obs.push_back({i, {1.0, 0.0}});
      obs.push_back({i, {0.0, 1.0}});
    } else {
      obs.push_back({i, normal[i]});
    }
  }
  return obs;
}

// Smooth random 2D field over the face, sampled at (x, y).
struct RandomField {
  std::vector<Eigen::Vector2d> centers;
  std::vector<Eigen::Vector3d> weights;
  double width = 0.35;

  RandomField(Rng& rng, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      centers.emplace_back(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.9));
      weights.emplace_back(rng.normal(), rng.normal(), rng.normal());
    }
  }

  Eigen::Vector3d operator()(double x, double y) const {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const double d2 = (centers[i] - Eigen::Vector2d(x, y)).squaredNorm();
      v += weights[i] * std::exp(-d2 / (2.0 * width * width));
    }
    return v;
  }
};

void normalize_columns(Eigen::MatrixXd& basis, double amplitude) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    double peak = 0.0;
    for (Eigen::Index v = 0; v < basis.rows() / 3; ++v) {
      peak = std::max(peak, basis.col(c).segment<3>(3 * v).norm());
    }
    if (peak > 0.0) basis.col(c) *= amplitude / peak;
  }
}

}  // namespace

Eigen::MatrixXd mean_landmark_layout() {
  Eigen::MatrixXd m(geometry::kLandmarkCount, 3);
  for (int j = 0; j <= 16; ++j) {
    const double t = kPi * j / 16.0;
    m.row(j) << -0.78 * std::cos(t), -0.12 + 0.86 * std::sin(t), 0.45 * (1.0 - std::sin(t));
  }
  for (int j = 0; j < 5; ++j) {
    const double s = j / 4.0;
    const double arch = 0.08 * std::sin(kPi * s);
    m.row(17 + j) << -0.64 + 0.5 * s, -0.42 - arch, 0.02;
    m.row(22 + j) << 0.14 + 0.5 * s, -0.42 - 0.08 * std::sin(kPi * (1.0 - s)), 0.02;
  }
  for (int j = 0; j < 4; ++j) {
    m.row(27 + j) << 0.0, -0.3 + 0.13 * j, -0.08 - 0.07 * j;
  }
  for (int j = 0; j < 5; ++j) {
    const double u = (j - 2) / 2.0;
    m.row(31 + j) << 0.18 * u, 0.2 + 0.04 * (1.0 - std::abs(u)), -0.16 + 0.04 * std::abs(u);
  }
  const std::initializer_list<double> eye{kPi, 2 * kPi / 3, kPi / 3, 0.0, -kPi / 3, -2 * kPi / 3};
  ellipse(m, 36, -0.36, -0.22, 0.15, 0.07, 0.0, eye);
  ellipse(m, 42, 0.36, -0.22, 0.15, 0.07, 0.0, eye);
  ellipse(m, 48, 0.0, 0.46, 0.3, 0.13, -0.06,
          {kPi, 5 * kPi / 6, 4 * kPi / 6, kPi / 2, 2 * kPi / 6, kPi / 6, 0.0, -kPi / 6,
           -2 * kPi / 6, -kPi / 2, -4 * kPi / 6, -5 * kPi / 6});
  ellipse(m, 60, 0.0, 0.46, 0.2, 0.06, -0.05,
          {kPi, 3 * kPi / 4, kPi / 2, kPi / 4, 0.0, -kPi / 4, -kPi / 2, -3 * kPi / 4});
  return m;
}

MorphableModel make_synthetic_model(const SyntheticModelConfig& config) {
  if (config.visible_shape_rank == 0 || config.visible_shape_rank > config.shape_count) {
    throw ConfigError("synthetic model: visible shape rank must be in [1, shape_count]");
  }
  Rng rng(config.seed);
  MorphableModel model;
  const std::size_t lm = geometry::kLandmarkCount;
  const std::size_t verts = lm + config.extra_vertices;
  const auto V = static_cast<Eigen::Index>(verts);

  model.mean.resize(V, 3);
  model.mean.topRows(static_cast<Eigen::Index>(lm)) = mean_landmark_layout();
  for (std::size_t k = 0; k < config.extra_vertices; ++k) {
    const double r = std::sqrt((k + 0.5) / static_cast<double>(config.extra_vertices));
    const double theta = 2.399963229728653 * static_cast<double>(k);
    const double x = 0.76 * r * std::cos(theta);
    const double y = 0.02 + 0.86 * r * std::sin(theta);
    const double nose = -0.2 * std::exp(-(x * x + (y + 0.05) * (y + 0.05)) / 0.02);
    model.mean.row(static_cast<Eigen::Index>(lm + k)) << x, y, 0.45 * r * r + nose;
  }
  for (std::size_t i = 0; i < lm; ++i) model.landmark_vertex_ids[i] = i;
  model.contour_groups = ibug_contour_groups();
  model.endpoint = ibug_endpoints();

  // Observation space at the reference camera.
  const std::vector<Observation> obs = observations(model);
  const auto n_obs = static_cast<Eigen::Index>(obs.size());
  const auto visible = static_cast<Eigen::Index>(config.visible_shape_rank);
  const auto n_exp = static_cast<Eigen::Index>(config.expr_count);
  if (visible + n_exp + 6 > n_obs) {
    throw ConfigError("synthetic model: more visible deformations than observed coordinates");
  }
  PoseParams ref;
  ref.translation = {0.0, 0.0, config.reference_depth};
  ref.focal = static_cast<double>(config.image_size);
  ref.cx = ref.cy = ref.focal / 2.0;

  auto observe = [&](const Eigen::MatrixXd& lm_pts, const PoseParams& pose) {
    Eigen::VectorXd o(n_obs);
    for (Eigen::Index k = 0; k < n_obs; ++k) {
      const auto& ob = obs[static_cast<std::size_t>(k)];
      const Eigen::Vector2d p =
          project_vertex(lm_pts.row(static_cast<Eigen::Index>(ob.landmark)).transpose(), pose);
      o(k) = p.dot(ob.direction);
    }
    return o;
  };
  const Eigen::MatrixXd mean_lm = model.mean.topRows(static_cast<Eigen::Index>(lm));
  Eigen::MatrixXd pose_tangent(n_obs, 6);
  for (int j = 0; j < 6; ++j) {
    const double h = 1e-5;
    Eigen::Matrix<double, 6, 1> xp = ref.extrinsics(), xm = xp;
    xp(j) += h;
    xm(j) -= h;
    PoseParams pp = ref, pm = ref;
    pp.set_extrinsics(xp);
    pm.set_extrinsics(xm);
    pose_tangent.col(j) = (observe(mean_lm, pp) - observe(mean_lm, pm)) / (2.0 * h);
  }

  // Smooth random candidates, made orthogonal to the pose motion and to one
  // another.
  Eigen::MatrixXd cand(n_obs, 6 + visible + n_exp);
  cand.leftCols(6) = pose_tangent;
  for (Eigen::Index c = 6; c < cand.cols(); ++c) {
    const RandomField field(rng, 8);
    for (Eigen::Index k = 0; k < n_obs; ++k) {
      const auto& ob = obs[static_cast<std::size_t>(k)];
      const auto id = static_cast<Eigen::Index>(ob.landmark);
      cand(k, c) = field(mean_lm(id, 0), mean_lm(id, 1)).head<2>().dot(ob.direction);
    }
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(cand);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n_obs, cand.cols());
  const Eigen::MatrixXd visible_obs = q.middleCols(6, visible);
  const Eigen::MatrixXd expr_obs = q.middleCols(6 + visible, n_exp);

  // Observed image-space coordinates back to 3D displacements (z = 0).
  auto lift = [&](const Eigen::VectorXd& o) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lm), 3);
    for (Eigen::Index k = 0; k < n_obs; ++k) {
      const auto& ob = obs[static_cast<std::size_t>(k)];
      const auto id = static_cast<Eigen::Index>(ob.landmark);
      const double depth = config.reference_depth + mean_lm(id, 2);
      d.row(id).head<2>() += o(k) * depth / ref.focal * ob.direction.transpose();
    }
    return d;
  };
  // Spread landmark displacements over the remaining vertices.
  auto spread = [&](const Eigen::MatrixXd& lm_disp, Eigen::VectorXd& column) {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(lm); ++i) {
      column.segment<3>(3 * i) = lm_disp.row(i).transpose();
    }
    for (Eigen::Index v = static_cast<Eigen::Index>(lm); v < V; ++v) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      double wsum = 0.0;
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(lm); ++i) {
        const double d2 = (model.mean.row(v).head<2>() - mean_lm.row(i).head<2>()).squaredNorm();
        const double w = std::exp(-d2 / 0.02);
        acc += w * lm_disp.row(i).transpose();
        wsum += w;
      }
      column.segment<3>(3 * v) = acc / (wsum + 1e-3);
    }
  };

  model.expr_basis.resize(3 * V, n_exp);
  for (Eigen::Index j = 0; j < n_exp; ++j) {
    Eigen::VectorXd col(3 * V);
    spread(lift(expr_obs.col(j)), col);
    model.expr_basis.col(j) = col;
  }

  const auto n_shape = static_cast<Eigen::Index>(config.shape_count);
  model.shape_basis.resize(3 * V, n_shape);
  std::vector<Eigen::MatrixXd> visible_lift;
  for (Eigen::Index j = 0; j < visible; ++j) visible_lift.push_back(lift(visible_obs.col(j)));
  for (Eigen::Index s = 0; s < n_shape; ++s) {
    Eigen::MatrixXd lm_disp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(lm), 3);
    for (Eigen::Index j = 0; j < visible; ++j) lm_disp += rng.normal() * visible_lift[static_cast<std::size_t>(j)];
    Eigen::VectorXd col(3 * V);
    spread(lm_disp, col);
    // Off-landmark detail that no landmark observes.
    const RandomField detail(rng, 6);
    const double gain = lm_disp.rowwise().norm().maxCoeff();
    for (Eigen::Index v = static_cast<Eigen::Index>(lm); v < V; ++v) {
      col.segment<3>(3 * v) += 0.5 * gain * detail(model.mean(v, 0), model.mean(v, 1)) / 3.0;
    }
    model.shape_basis.col(s) = col;
  }

  normalize_columns(model.shape_basis, config.unit_amplitude);
  normalize_columns(model.expr_basis, config.unit_amplitude);
  model.validate();
  return model;
}

geometry::LandmarkSet68 render_landmarks(const MorphableModel& model, const Eigen::VectorXd& f_s,
                                         const Eigen::VectorXd& f_exp, const PoseParams& pose,
                                         geometry::ImageSize size) {
  const Eigen::MatrixXd proj = project_landmarks(model, f_s, f_exp, pose);
  geometry::LandmarkSet68 out;
  out.image_size = size;
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
    out.points[i] = {proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)};
  }
  return out;
}

SyntheticScene make_scene(const MorphableModel& model, const SceneConfig& config, Rng& rng) {
  SyntheticScene scene;
  const auto ns = static_cast<Eigen::Index>(model.shape_count());
  const auto ne = static_cast<Eigen::Index>(model.expr_count());
  scene.f_s.resize(ns);
  scene.f_exp.resize(ne);
  for (Eigen::Index i = 0; i < ns; ++i) scene.f_s(i) = rng.uniform(-1.0, 1.0) * config.coefficient_bound;
  for (Eigen::Index i = 0; i < ne; ++i) scene.f_exp(i) = rng.uniform(-1.0, 1.0) * config.coefficient_bound;
  const double size = static_cast<double>(config.image_size);
  scene.pose.focal = size;
  scene.pose.cx = scene.pose.cy = size / 2.0;
  for (int k = 0; k < 3; ++k) scene.pose.rotation(k) = rng.uniform(-1.0, 1.0) * config.max_rotation;
  scene.pose.translation = {rng.uniform(-1.0, 1.0) * config.max_shift,
                            rng.uniform(-1.0, 1.0) * config.max_shift,
                            config.reference_depth * (1.0 + rng.uniform(-1.0, 1.0) * config.depth_jitter)};
  scene.landmarks = render_landmarks(model, scene.f_s, scene.f_exp, scene.pose,
                                     {config.image_size, config.image_size});
  scene.landmarks.validate();
  return scene;
}

}  // namespace glee::morph
