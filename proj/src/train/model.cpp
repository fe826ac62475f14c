#include "glee/train/model.hpp"

#include "glee/common/error.hpp"

namespace glee::train {

namespace {

constexpr std::uint64_t kClassifierStream = 0x5bd1e9955bd1e995ULL;

}  // namespace

FaceSample make_face_sample(const geometry::Image& frame, const geometry::LandmarkSet68& landmarks,
                            std::size_t canonical_size) {
  const geometry::AlignedFace aligned =
      geometry::align_face(frame, landmarks, geometry::AlignmentConfig::with_size(canonical_size));
  FaceSample s;
  s.face = embed::to_chw(aligned.pixels);
  s.crops = geometry::crop_parts(aligned);
  return s;
}

FaceSample load_face_sample(const ImageRef& ref, std::size_t canonical_size) {
  const geometry::Image frame = geometry::read_netpbm(ref.image_path);
  const geometry::LandmarkSet68 lm = geometry::read_landmarks(ref.landmark_path, frame.size());
  return make_face_sample(frame, lm, canonical_size);
}

const FaceSample& FaceCache::get(const ImageRef& ref) {
  auto it = samples_.find(ref.image_path);
  if (it == samples_.end()) {
    it = samples_.emplace(ref.image_path, load_face_sample(ref, canonical_size_)).first;
  }
  return it->second;
}

nn::Var joint_feature(nn::Var e_exp, std::span<const double> f_exp) {
  if (f_exp.size() != 51) {
    throw ValidationError("joint feature: expected 51 expression coefficients, got " +
                          std::to_string(f_exp.size()));
  }
  nn::Tensor f({f_exp.size()});
  for (std::size_t i = 0; i < f_exp.size(); ++i) f[i] = static_cast<float>(f_exp[i]);
  return nn::concat({e_exp, e_exp.tape().constant(std::move(f))});
}

GleeModel::GleeModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  reset_embedding();
  reset_classifier();
}

void GleeModel::reset_embedding() {
  Rng rng(seed_);
  embedding_ = embed::EmbeddingNet(config_.embedding, rng);
}

void GleeModel::reset_classifier() {
  Rng rng(seed_ ^ kClassifierStream);
  classifier_ = au::AuClassifier(config_.classifier, rng);
}

embed::EmbeddingVars GleeModel::embed(nn::Tape& tape, const FaceSample& sample) {
  return embedding_.forward(tape, tape.constant(sample.face), sample.crops);
}

GleeModel::Output GleeModel::forward(nn::Tape& tape, const FaceSample& sample,
                                     std::span<const double> f_exp) {
  Output out;
  out.embedding = embed(tape, sample);
  out.classifier = classifier_.forward(tape, joint_feature(out.embedding.e_exp, f_exp));
  return out;
}

Inference GleeModel::infer(const FaceSample& sample, std::span<const double> f_exp) {
  nn::Tape tape;
  const Output o = forward(tape, sample, f_exp);
  Inference r;
  for (std::size_t i = 0; i < embed::kEmbedDim; ++i) {
    r.embedding.g_exp[i] = o.embedding.g_exp.value()[i];
    r.embedding.l_exp[i] = o.embedding.l_exp.value()[i];
    r.embedding.e_exp[i] = o.embedding.e_exp.value()[i];
  }
  r.prediction =
      au::to_prediction(o.classifier.initial_logits.value(), o.classifier.final_logits.value());
  return r;
}

nn::ParameterList GleeModel::embedding_parameters() {
  nn::ParameterList p;
  embedding_.parameters(p);
  return p;
}

nn::ParameterList GleeModel::identity_parameters() {
  nn::ParameterList p;
  embedding_.identity_parameters(p);
  return p;
}

nn::ParameterList GleeModel::classifier_parameters() {
  nn::ParameterList p;
  classifier_.parameters(p);
  return p;
}

}  // namespace glee::train
