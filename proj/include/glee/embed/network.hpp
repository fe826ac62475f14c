#pragma once

#include <array>
#include <string>
#include <vector>

#include "glee/common/rng.hpp"
#include "glee/geometry/crops.hpp"
#include "glee/nn/layers.hpp"

namespace glee::embed {

inline constexpr std::size_t kEmbedDim = 16;

struct EmbeddingConfig {
  double margin = 0.2;
  // 3x3 stride-2 conv widths of the face/identity backbone; D_b is the last.
  std::vector<std::size_t> backbone_widths{16, 32, 64, 128};
  // 3x3 stride-2 conv widths of each local extractor; d_loc is the last.
  std::vector<std::size_t> local_widths{16, 32, 64, 64};
  std::size_t attention_heads = 1;
  std::size_t attention_key_dim = 8;
  std::size_t local_hidden = 128;

  std::size_t backbone_dim() const { return backbone_widths.back(); }
  std::size_t local_dim() const { return local_widths.back(); }

  // Throws ConfigError on empty widths, a non-positive margin, or channels
  // not divisible by the head count.
  void validate() const;
};

// H x W x 3 image to a [3, H, W] tensor.
nn::Tensor to_chw(const geometry::Image& img);

// Strided 3x3 conv stack with ReLU, global average pooled.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng);

  nn::Var forward(nn::Tape& tape, nn::Var image);
  void parameters(nn::ParameterList& out);

  // Copies weights from another backbone of the same architecture.
  void copy_from(const Backbone& other);
  void set_frozen(bool frozen);

  std::vector<nn::Conv2d>& layers() { return layers_; }
  const std::vector<nn::Conv2d>& layers() const { return layers_; }

 private:
  std::vector<nn::Conv2d> layers_;
};

// V_exp = V_face - V_id, G_exp = reducer(V_exp). The identity model starts
// as an exact copy of the face model and is frozen.
class GlobalBranch {
 public:
  GlobalBranch() = default;
  GlobalBranch(const EmbeddingConfig& config, Rng& rng);

  struct Output {
    nn::Var face;
    nn::Var identity;
    nn::Var g_exp;
  };
  Output forward(nn::Tape& tape, nn::Var image);

  // Trainable parameters only.
  void parameters(nn::ParameterList& out);
  // Frozen identity weights.
  void identity_parameters(nn::ParameterList& out);

  Backbone& face_model() { return face_; }
  Backbone& identity_model() { return identity_; }
  nn::Linear& reducer() { return reducer_; }

 private:
  Backbone face_;
  Backbone identity_;
  nn::Linear reducer_;
};

// Non-local attention over spatial positions: 1x1 query/key/value maps,
// softmax over positions, output projection (zero at init) added to the
// input.
class SelfAttention2d {
 public:
  SelfAttention2d() = default;
  SelfAttention2d(const std::string& name, std::size_t channels, std::size_t key_dim,
                  std::size_t heads, Rng& rng);

  // x: [C, H, W]. When attention is given it receives one [HW, HW]
  // row-stochastic matrix per head.
  nn::Var forward(nn::Tape& tape, nn::Var x, std::vector<nn::Tensor>* attention = nullptr);
  void parameters(nn::ParameterList& out);

  nn::Parameter& output_weight() { return out_w_; }

 private:
  std::size_t channels_ = 0, key_dim_ = 0, heads_ = 1;
  nn::Parameter q_w_, q_b_, k_w_, k_b_, v_w_, v_b_, out_w_, out_b_;
};

class LocalExtractor {
 public:
  LocalExtractor() = default;
  LocalExtractor(const std::string& name, const EmbeddingConfig& config, Rng& rng);

  // crop: [3, 96, 96] -> [d_loc]
  nn::Var forward(nn::Tape& tape, nn::Var crop, std::vector<nn::Tensor>* attention = nullptr);
  void parameters(nn::ParameterList& out);

  SelfAttention2d& attention() { return attention_; }

 private:
  std::vector<nn::Conv2d> convs_;
  SelfAttention2d attention_;
};

class LocalBranch {
 public:
  LocalBranch() = default;
  LocalBranch(const EmbeddingConfig& config, Rng& rng);

  // Features are concatenated in the fixed crop-name order.
  nn::Var forward(nn::Tape& tape, const geometry::CropSet& crops);
  void parameters(nn::ParameterList& out);

  LocalExtractor& extractor(geometry::CropName name) {
    return extractors_[static_cast<std::size_t>(name)];
  }

 private:
  std::vector<LocalExtractor> extractors_;
  nn::Linear hidden_;
  nn::Linear out_;
};

struct EmbeddingVars {
  nn::Var g_exp;
  nn::Var l_exp;
  nn::Var e_exp;
};

struct ExpressionEmbedding {
  std::array<float, kEmbedDim> g_exp{};
  std::array<float, kEmbedDim> l_exp{};
  std::array<float, kEmbedDim> e_exp{};
};

// Global and local branches together.
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  EmbeddingNet(const EmbeddingConfig& config, Rng& rng);

  // face: [3, S, S] aligned face.
  EmbeddingVars forward(nn::Tape& tape, nn::Var face, const geometry::CropSet& crops);

  // Tape-free convenience over an aligned face image.
  ExpressionEmbedding embed(const geometry::Image& face, const geometry::CropSet& crops);

  void parameters(nn::ParameterList& out);
  void identity_parameters(nn::ParameterList& out);

  const EmbeddingConfig& config() const { return config_; }
  GlobalBranch& global() { return global_; }
  LocalBranch& local() { return local_; }

 private:
  EmbeddingConfig config_;
  GlobalBranch global_;
  LocalBranch local_;
};

}  // namespace glee::embed
