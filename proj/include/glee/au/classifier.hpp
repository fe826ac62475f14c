#pragma once

#include <vector>

#include "glee/common/rng.hpp"
#include "glee/nn/layers.hpp"

namespace glee::au {

inline constexpr std::size_t kJointFeatureDim = 16 + 51;

struct ClassifierConfig {
  std::size_t au_count = 12;
  std::size_t feature_dim = kJointFeatureDim;
  std::size_t token_dim = 32;
  std::size_t view_hidden = 64;
  std::size_t encoder_count = 3;
  std::size_t head_count = 4;
  std::size_t feedforward_width = 128;

  void validate() const;
};

struct AUPrediction {
  std::vector<double> initial;
  std::vector<double> final;
  std::vector<bool> occurrences;
};

// Presence is strictly p > 0.5.
bool occurs(double p);

// Per-AU MLP feature_dim -> view_hidden -> token_dim.
class ViewMlp {
 public:
  ViewMlp() = default;
  ViewMlp(const std::string& name, const ClassifierConfig& config, Rng& rng);

  nn::Var forward(nn::Tape& tape, nn::Var feature);
  void parameters(nn::ParameterList& out);
  nn::Linear& output_layer() { return out_; }

 private:
  nn::Linear hidden_;
  nn::Linear out_;
};

// Pre-norm Transformer encoder: x + MHA(LN(x)), then x + FFN(LN(x)).
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(const std::string& name, const ClassifierConfig& config, Rng& rng);

  // tokens: [N, d]. attention receives one [N, N] matrix per head.
  nn::Var forward(nn::Tape& tape, nn::Var tokens, std::vector<nn::Tensor>* attention = nullptr);
  void parameters(nn::ParameterList& out);

 private:
  std::size_t heads_ = 1;
  nn::LayerNorm norm1_, norm2_;
  nn::Linear query_, key_, value_, proj_;
  nn::Linear ff1_, ff2_;
};

struct ClassifierVars {
  nn::Var tokens;          // [N_a, d] after the view MLPs
  nn::Var encoded;         // [N_a, d]
  nn::Var initial_logits;  // [N_a]
  nn::Var final_logits;    // [N_a]
};

class AuClassifier {
 public:
  AuClassifier() = default;
  AuClassifier(const ClassifierConfig& config, Rng& rng);

  // N_a x token_dim tokens from the joint feature F_exp.
  nn::Var project_views(nn::Tape& tape, nn::Var feature);
  nn::Var encode(nn::Tape& tape, nn::Var tokens,
                 std::vector<std::vector<nn::Tensor>>* attention = nullptr);
  // Per-AU linear heads, then the joint FC over the initial logits.
  std::pair<nn::Var, nn::Var> heads(nn::Tape& tape, nn::Var encoded);

  ClassifierVars forward(nn::Tape& tape, nn::Var feature);
  AUPrediction predict(const std::vector<float>& feature);

  void parameters(nn::ParameterList& out);

  const ClassifierConfig& config() const { return config_; }
  std::vector<ViewMlp>& views() { return views_; }
  nn::Linear& joint() { return joint_; }
  std::vector<nn::Linear>& au_heads() { return heads_; }

 private:
  ClassifierConfig config_;
  std::vector<ViewMlp> views_;
  std::vector<EncoderBlock> encoders_;
  std::vector<nn::Linear> heads_;
  nn::Linear joint_;
};

AUPrediction to_prediction(const nn::Tensor& initial_logits, const nn::Tensor& final_logits);

}  // namespace glee::au
