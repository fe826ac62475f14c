#pragma once

// Synthetic datasets written to disk in the regular manifest formats, so
// every pipeline stage runs without external data.

#include <cstdint>
#include <string>

#include "glee/morph/synthetic.hpp"

namespace glee::train {

struct ClusterFixtureConfig {
  std::size_t train_triplets = 200;
  std::size_t heldout_triplets = 100;
  // Distinct images per cluster; triplets are drawn from these pools.
  std::size_t pool_per_cluster = 20;
  std::size_t heldout_pool_per_cluster = 10;
  std::size_t image_size = 128;
  double noise = 0.05;
  std::uint64_t seed = 1;
};

struct ClusterFixture {
  std::string train_manifest;
  std::string heldout_manifest;
};

// Two pixel-space clusters (distinct smooth colour fields plus per-image
// perturbations) on a common face layout. Anchors and positives come from
// cluster A, negatives from cluster B; held-out triplets use separate
// images.
ClusterFixture write_cluster_triplets(const std::string& dir, const ClusterFixtureConfig& config);

struct PlantedFixtureConfig {
  std::size_t frames = 60;
  std::size_t au_count = 12;
  std::size_t subjects = 6;
  // |f_exp[j]| >= margin on every coefficient that drives a label.
  double margin = 0.3;
  std::uint64_t seed = 2;
  morph::SceneConfig scene;
};

struct PlantedFixture {
  std::string manifest;
  std::string model;         // synthetic morphable model file
  std::string coefficients;  // ground-truth coefficient table
};

// Frames rendered from the synthetic morphable model. AU i occurs iff
// f_exp[driver(i)] > 0, a planted linear rule on F_exp. Subjects share f_s.
PlantedFixture write_planted_au(const std::string& dir, const PlantedFixtureConfig& config);

// Expression coefficient index that drives AU i in the planted fixture.
std::size_t planted_driver(std::size_t au, std::size_t au_count);

struct SceneFixture {
  std::string model;
  std::string landmark_dir;  // <id>.pts files
  std::string truth;         // ground-truth coefficient table
};

SceneFixture write_scene_fixture(const std::string& dir, std::size_t count, std::uint64_t seed,
                                 const morph::SceneConfig& scene = {});

}  // namespace glee::train
