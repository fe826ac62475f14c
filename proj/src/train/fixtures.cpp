#include "glee/train/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "glee/common/error.hpp"
#include "glee/geometry/image.hpp"
#include "glee/geometry/landmarks.hpp"
#include "glee/morph/coeffs.hpp"
#include "glee/train/manifest.hpp"

namespace glee::train {

namespace fs = std::filesystem;

namespace {

// Smooth colour field: a few random plane waves per channel.
struct Field {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  std::array<double, 3> base{};

  Field(Rng& rng, std::size_t count, double amplitude) {
    for (int c = 0; c < 3; ++c) {
      base[c] = rng.uniform(0.25, 0.75);
      for (std::size_t i = 0; i < count; ++i) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double freq = rng.uniform(1.0, 4.0);
        waves[c].push_back({freq * std::cos(angle), freq * std::sin(angle),
                            rng.uniform(0.0, 2.0 * std::numbers::pi), amplitude});
      }
    }
  }

  double at(int c, double u, double v) const {
    double s = 0.0;
    for (const Wave& w : waves[c]) {
      s += w.amp * std::sin(2.0 * std::numbers::pi * (w.kx * u + w.ky * v) + w.phase);
    }
    return s;
  }
};

float clamp01(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

// Mean landmark layout scaled into a square image.
geometry::LandmarkSet68 layout_landmarks(std::size_t size, Rng& rng, double jitter) {
  const Eigen::MatrixXd mean = morph::mean_landmark_layout();
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    x0 = std::min(x0, mean(i, 0));
    x1 = std::max(x1, mean(i, 0));
    y0 = std::min(y0, mean(i, 1));
    y1 = std::max(y1, mean(i, 1));
  }
  const double s = 0.6 * static_cast<double>(size) / std::max(x1 - x0, y1 - y0);
  const double cx = 0.5 * static_cast<double>(size), cy = 0.55 * static_cast<double>(size);
  geometry::LandmarkSet68 lm;
  lm.image_size = {size, size};
  for (std::size_t i = 0; i < geometry::kLandmarkCount; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    lm.points[i] = {cx + s * (mean(r, 0) - 0.5 * (x0 + x1)) + rng.uniform(-jitter, jitter),
                    cy + s * (mean(r, 1) - 0.5 * (y0 + y1)) + rng.uniform(-jitter, jitter)};
  }
  return lm;
}

void draw_dots(geometry::Image& img, const geometry::LandmarkSet68& lm) {
  for (const geometry::Point2& p : lm.points) {
    const long r0 = std::lround(p.y), c0 = std::lround(p.x);
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        const long r = r0 + dr, c = c0 + dc;
        if (r < 0 || c < 0 || r >= static_cast<long>(img.height) || c >= static_cast<long>(img.width)) {
          continue;
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
          img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) = 1.0f;
        }
      }
    }
  }
}

geometry::Image render_field(const Field& main, const Field* detail, std::size_t size, double noise,
                             Rng& rng) {
  geometry::Image img(size, size, 3);
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double u = (static_cast<double>(c) + 0.5) * inv, v = (static_cast<double>(r) + 0.5) * inv;
      for (int ch = 0; ch < 3; ++ch) {
        double val = main.base[ch] + main.at(ch, u, v);
        if (detail != nullptr) val += detail->at(ch, u, v);
        val += noise * rng.uniform(-1.0, 1.0);
        img.at(r, c, static_cast<std::size_t>(ch)) = clamp01(val);
      }
    }
  }
  return img;
}

std::string pad(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

ClusterFixture write_cluster_triplets(const std::string& dir, const ClusterFixtureConfig& cfg) {
  if (cfg.pool_per_cluster < 2 || cfg.heldout_pool_per_cluster < 2) {
    throw ConfigError("cluster fixture: pools need at least two images per cluster");
  }
  fs::create_directories(fs::path(dir) / "images");
  Rng rng(cfg.seed);
  const Field cluster_a(rng, 4, 0.12), cluster_b(rng, 4, 0.12);

  auto make_pool = [&](const std::string& tag, const Field& field, std::size_t count) {
    std::vector<ImageRef> refs;
    for (std::size_t i = 0; i < count; ++i) {
      const Field detail(rng, 3, 0.03);
      geometry::Image img = render_field(field, &detail, cfg.image_size, cfg.noise, rng);
      const geometry::LandmarkSet68 lm = layout_landmarks(cfg.image_size, rng, 1.0);
      draw_dots(img, lm);
      const std::string stem = "images/" + tag + "_" + pad(i);
      geometry::write_netpbm((fs::path(dir) / (stem + ".ppm")).string(), img);
      geometry::write_landmarks((fs::path(dir) / (stem + ".pts")).string(), lm);
      refs.push_back({stem + ".ppm", stem + ".pts"});
    }
    return refs;
  };

  auto make_triplets = [&](const std::vector<ImageRef>& a, const std::vector<ImageRef>& b,
                           std::size_t count) {
    TripletManifest m;
    m.notes.push_back(" synthetic cluster triplets: anchor/positive from A, negative from B");
    for (std::size_t t = 0; t < count; ++t) {
      const std::size_t ia = rng.below(a.size());
      std::size_t ip = rng.below(a.size() - 1);
      if (ip >= ia) ++ip;
      m.records.push_back({a[ia], a[ip], b[rng.below(b.size())]});
    }
    return m;
  };

  const auto train_a = make_pool("a", cluster_a, cfg.pool_per_cluster);
  const auto train_b = make_pool("b", cluster_b, cfg.pool_per_cluster);
  const auto held_a = make_pool("heldout_a", cluster_a, cfg.heldout_pool_per_cluster);
  const auto held_b = make_pool("heldout_b", cluster_b, cfg.heldout_pool_per_cluster);

  ClusterFixture out;
  out.train_manifest = (fs::path(dir) / "triplets.tsv").string();
  out.heldout_manifest = (fs::path(dir) / "heldout.tsv").string();
  write_triplet_manifest(out.train_manifest, make_triplets(train_a, train_b, cfg.train_triplets));
  write_triplet_manifest(out.heldout_manifest, make_triplets(held_a, held_b, cfg.heldout_triplets));
  return out;
}

std::size_t planted_driver(std::size_t au, std::size_t au_count) {
  // Spread the drivers over the 51 coefficients.
  return (au * 51) / std::max<std::size_t>(au_count, 1);
}

PlantedFixture write_planted_au(const std::string& dir, const PlantedFixtureConfig& cfg) {
  if (cfg.au_count == 0 || cfg.au_count > 51) throw ConfigError("planted fixture: N_a must be in [1, 51]");
  if (cfg.subjects == 0 || cfg.frames == 0) throw ConfigError("planted fixture: empty fixture");
  if (!(cfg.margin >= 0.0 && cfg.margin < cfg.scene.coefficient_bound)) {
    throw ConfigError("planted fixture: margin must be below the coefficient bound");
  }
  fs::create_directories(fs::path(dir) / "frames");
  Rng rng(cfg.seed);
  const morph::MorphableModel model = morph::make_synthetic_model();

  PlantedFixture out;
  out.model = (fs::path(dir) / "model.glmm").string();
  out.manifest = (fs::path(dir) / "manifest.tsv").string();
  out.coefficients = (fs::path(dir) / "truth.tsv").string();
  morph::save_model(out.model, model);

  std::vector<Eigen::VectorXd> subject_shape;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    subject_shape.push_back(morph::make_scene(model, cfg.scene, rng).f_s);
  }
  const Field skin(rng, 3, 0.08);

  AUManifest m;
  m.au_count = cfg.au_count;
  m.notes.push_back(" planted-signal frames: AU i occurs iff f_exp[driver(i)] > 0");
  std::vector<morph::CoefficientRow> truth;
  const double bound = cfg.scene.coefficient_bound;
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    morph::SyntheticScene scene = morph::make_scene(model, cfg.scene, rng);
    const std::size_t subject = f % cfg.subjects;
    scene.f_s = subject_shape[subject];
    AURecord r;
    r.frame_id = "frame_" + pad(f);
    r.subject_id = "S" + std::to_string(subject);
    for (std::size_t i = 0; i < cfg.au_count; ++i) {
      double& c = scene.f_exp[static_cast<Eigen::Index>(planted_driver(i, cfg.au_count))];
      if (std::abs(c) < cfg.margin) c = (c < 0.0 ? -1.0 : 1.0) * rng.uniform(cfg.margin, bound);
      r.labels.push_back(c > 0.0 ? 1 : 0);
    }
    const std::size_t size = cfg.scene.image_size;
    scene.landmarks = morph::render_landmarks(model, scene.f_s, scene.f_exp, scene.pose, {size, size});
    geometry::Image img = render_field(skin, nullptr, size, 0.02, rng);
    draw_dots(img, scene.landmarks);

    const std::string stem = "frames/" + r.frame_id;
    geometry::write_netpbm((fs::path(dir) / (stem + ".ppm")).string(), img);
    geometry::write_landmarks((fs::path(dir) / (stem + ".pts")).string(), scene.landmarks);
    r.image_path = stem + ".ppm";
    r.landmark_path = stem + ".pts";
    m.records.push_back(r);

    morph::FitResult fr;
    fr.f_s = scene.f_s;
    fr.f_exp = scene.f_exp;
    fr.pose = scene.pose;
    fr.converged = true;
    truth.push_back(morph::make_row(r.frame_id, fr));
  }
  write_au_manifest(out.manifest, m);
  morph::write_coefficients(out.coefficients, truth);
  return out;
}

SceneFixture write_scene_fixture(const std::string& dir, std::size_t count, std::uint64_t seed,
                                 const morph::SceneConfig& scene_cfg) {
  fs::create_directories(fs::path(dir) / "landmarks");
  Rng rng(seed);
  const morph::MorphableModel model = morph::make_synthetic_model();
  SceneFixture out;
  out.model = (fs::path(dir) / "model.glmm").string();
  out.landmark_dir = (fs::path(dir) / "landmarks").string();
  out.truth = (fs::path(dir) / "truth.tsv").string();
  morph::save_model(out.model, model);
  std::vector<morph::CoefficientRow> truth;
  for (std::size_t i = 0; i < count; ++i) {
    const morph::SyntheticScene s = morph::make_scene(model, scene_cfg, rng);
    const std::string id = "scene_" + pad(i);
    geometry::write_landmarks((fs::path(out.landmark_dir) / (id + ".pts")).string(), s.landmarks);
    morph::FitResult fr;
    fr.f_s = s.f_s;
    fr.f_exp = s.f_exp;
    fr.pose = s.pose;
    fr.converged = true;
    truth.push_back(morph::make_row(id, fr));
  }
  morph::write_coefficients(out.truth, truth);
  return out;
}

}  // namespace glee::train
