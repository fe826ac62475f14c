#include "glee/au/classifier.hpp"

#include <cmath>

#include "glee/common/error.hpp"

namespace glee::au {

using nn::ParameterList;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void ClassifierConfig::validate() const {
  if (au_count == 0) throw ConfigError("classifier: N_a must be at least 1");
  if (feature_dim == 0 || token_dim == 0 || view_hidden == 0 || feedforward_width == 0) {
    throw ConfigError("classifier: layer widths must be positive");
  }
  if (head_count == 0 || token_dim % head_count != 0) {
    throw ConfigError("classifier: token_dim " + std::to_string(token_dim) +
                      " is not divisible by " + std::to_string(head_count) + " heads");
  }
}

bool occurs(double p) { return p > 0.5; }

ViewMlp::ViewMlp(const std::string& name, const ClassifierConfig& config, Rng& rng)
    : hidden_(name + ".hidden", config.feature_dim, config.view_hidden, true, rng),
      out_(name + ".out", config.view_hidden, config.token_dim, true, rng) {}

Var ViewMlp::forward(Tape& tape, Var feature) {
  return out_.forward(tape, nn::relu(hidden_.forward(tape, feature)));
}

void ViewMlp::parameters(ParameterList& out) {
  hidden_.parameters(out);
  out_.parameters(out);
}

EncoderBlock::EncoderBlock(const std::string& name, const ClassifierConfig& config, Rng& rng)
    : heads_(config.head_count),
      norm1_(name + ".norm1", config.token_dim),
      norm2_(name + ".norm2", config.token_dim),
      query_(name + ".query", config.token_dim, config.token_dim, true, rng),
      key_(name + ".key", config.token_dim, config.token_dim, true, rng),
      value_(name + ".value", config.token_dim, config.token_dim, true, rng),
      proj_(name + ".proj", config.token_dim, config.token_dim, true, rng),
      ff1_(name + ".ff1", config.token_dim, config.feedforward_width, true, rng),
      ff2_(name + ".ff2", config.feedforward_width, config.token_dim, true, rng) {}

Var EncoderBlock::forward(Tape& tape, Var tokens, std::vector<Tensor>* attention) {
  const std::size_t d = tokens.value().dim(1);
  const std::size_t dh = d / heads_;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

  const Var h = norm1_.forward(tape, tokens);
  const Var q = query_.forward(tape, h);
  const Var k = key_.forward(tape, h);
  const Var v = value_.forward(tape, h);
  std::vector<Var> mixed;
  if (attention != nullptr) attention->clear();
  for (std::size_t i = 0; i < heads_; ++i) {
    const Var qh = nn::slice_cols(q, i * dh, (i + 1) * dh);
    const Var kh = nn::slice_cols(k, i * dh, (i + 1) * dh);
    const Var vh = nn::slice_cols(v, i * dh, (i + 1) * dh);
    const Var a = nn::softmax_rows(nn::scale(nn::matmul_nt(qh, kh), inv_sqrt));
    if (attention != nullptr) attention->push_back(a.value());
    mixed.push_back(nn::matmul(a, vh));
  }
  const Var attended = heads_ == 1 ? mixed.front() : nn::concat_cols(mixed);
  const Var x = nn::add(tokens, proj_.forward(tape, attended));
  const Var ff = ff2_.forward(tape, nn::relu(ff1_.forward(tape, norm2_.forward(tape, x))));
  return nn::add(x, ff);
}

void EncoderBlock::parameters(ParameterList& out) {
  norm1_.parameters(out);
  query_.parameters(out);
  key_.parameters(out);
  value_.parameters(out);
  proj_.parameters(out);
  norm2_.parameters(out);
  ff1_.parameters(out);
  ff2_.parameters(out);
}

AuClassifier::AuClassifier(const ClassifierConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < config_.au_count; ++i) {
    views_.emplace_back("au.view" + std::to_string(i), config_, rng);
  }
  for (std::size_t i = 0; i < config_.encoder_count; ++i) {
    encoders_.emplace_back("au.encoder" + std::to_string(i), config_, rng);
  }
  for (std::size_t i = 0; i < config_.au_count; ++i) {
    heads_.emplace_back("au.head" + std::to_string(i), config_.token_dim, 1, true, rng);
  }
  joint_ = nn::Linear("au.joint", config_.au_count, config_.au_count, true, rng);
  Tensor& w = joint_.weight().value;
  w.fill(0.0f);
  for (std::size_t i = 0; i < config_.au_count; ++i) w.at(i, i) = 1.0f;
  joint_.bias().value.fill(0.0f);
}

Var AuClassifier::project_views(Tape& tape, Var feature) {
  const Tensor& f = feature.value();
  if (f.rank() != 1 || f.size() != config_.feature_dim) {
    throw ValidationError("classifier: expected a [" + std::to_string(config_.feature_dim) +
                          "] joint feature, got " + nn::to_string(f.shape()));
  }
  std::vector<Var> tokens;
  tokens.reserve(views_.size());
  for (ViewMlp& v : views_) tokens.push_back(v.forward(tape, feature));
  return nn::stack_rows(tokens);
}

Var AuClassifier::encode(Tape& tape, Var tokens, std::vector<std::vector<Tensor>>* attention) {
  const Tensor& t = tokens.value();
  if (t.rank() != 2 || t.dim(0) != config_.au_count || t.dim(1) != config_.token_dim) {
    throw ValidationError("classifier: expected [" + std::to_string(config_.au_count) + ", " +
                          std::to_string(config_.token_dim) + "] tokens, got " +
                          nn::to_string(t.shape()));
  }
  if (attention != nullptr) attention->assign(encoders_.size(), {});
  Var x = tokens;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    x = encoders_[i].forward(tape, x, attention != nullptr ? &(*attention)[i] : nullptr);
  }
  return x;
}

std::pair<Var, Var> AuClassifier::heads(Tape& tape, Var encoded) {
  std::vector<Var> logits;
  logits.reserve(heads_.size());
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    logits.push_back(heads_[i].forward(tape, nn::row(encoded, i)));
  }
  const Var initial = nn::concat(logits);
  return {initial, joint_.forward(tape, initial)};
}

ClassifierVars AuClassifier::forward(Tape& tape, Var feature) {
  ClassifierVars out;
  out.tokens = project_views(tape, feature);
  out.encoded = encode(tape, out.tokens);
  std::tie(out.initial_logits, out.final_logits) = heads(tape, out.encoded);
  return out;
}

AUPrediction AuClassifier::predict(const std::vector<float>& feature) {
  Tape tape;
  const ClassifierVars v =
      forward(tape, tape.constant(Tensor({feature.size()}, std::vector<float>(feature))));
  return to_prediction(v.initial_logits.value(), v.final_logits.value());
}

void AuClassifier::parameters(ParameterList& out) {
  for (ViewMlp& v : views_) v.parameters(out);
  for (EncoderBlock& e : encoders_) e.parameters(out);
  for (nn::Linear& h : heads_) h.parameters(out);
  joint_.parameters(out);
}

AUPrediction to_prediction(const Tensor& initial_logits, const Tensor& final_logits) {
  auto sigmoid = [](float z) { return 1.0 / (1.0 + std::exp(-static_cast<double>(z))); };
  AUPrediction p;
  for (float z : initial_logits.values()) p.initial.push_back(sigmoid(z));
  for (float z : final_logits.values()) {
    p.final.push_back(sigmoid(z));
    p.occurrences.push_back(occurs(p.final.back()));
  }
  return p;
}

}  // namespace glee::au
