#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "glee/au/classifier.hpp"
#include "glee/embed/network.hpp"
#include "glee/train/config.hpp"
#include "glee/train/manifest.hpp"

namespace glee::train {

// Aligned face as a [3, S, S] tensor plus its 16 crops.
struct FaceSample {
  nn::Tensor face;
  geometry::CropSet crops;
};

FaceSample make_face_sample(const geometry::Image& frame, const geometry::LandmarkSet68& landmarks,
                            std::size_t canonical_size);
// Reads a netpbm image and its landmark file.
FaceSample load_face_sample(const ImageRef& ref, std::size_t canonical_size);

// Decoded samples keyed by image path.
class FaceCache {
 public:
  explicit FaceCache(std::size_t canonical_size) : canonical_size_(canonical_size) {}
  const FaceSample& get(const ImageRef& ref);
  std::size_t size() const { return samples_.size(); }

 private:
  std::size_t canonical_size_;
  std::map<std::string, FaceSample> samples_;
};

// F_exp = [E_exp (16), f_exp (51)].
nn::Var joint_feature(nn::Var e_exp, std::span<const double> f_exp);

struct Inference {
  embed::ExpressionEmbedding embedding;
  au::AUPrediction prediction;
};

// Embedding network and AU classifier. The two are initialized from
// independent streams of the seed, so either can be re-created alone.
class GleeModel {
 public:
  GleeModel(const ModelConfig& config, std::uint64_t seed);

  void reset_embedding();
  void reset_classifier();

  struct Output {
    embed::EmbeddingVars embedding;
    au::ClassifierVars classifier;
  };
  Output forward(nn::Tape& tape, const FaceSample& sample, std::span<const double> f_exp);
  embed::EmbeddingVars embed(nn::Tape& tape, const FaceSample& sample);
  Inference infer(const FaceSample& sample, std::span<const double> f_exp);

  // Trainable embedding weights (face model, reducer, local branch).
  nn::ParameterList embedding_parameters();
  nn::ParameterList identity_parameters();
  nn::ParameterList classifier_parameters();

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  embed::EmbeddingNet& embedding() { return embedding_; }
  au::AuClassifier& classifier() { return classifier_; }

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  embed::EmbeddingNet embedding_;
  au::AuClassifier classifier_;
};

}  // namespace glee::train
