#include "glee/embed/network.hpp"

#include <cmath>

#include "glee/common/error.hpp"

namespace glee::embed {

using nn::Parameter;
using nn::ParameterList;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void EmbeddingConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("embedding: margin must be positive");
  if (backbone_widths.empty() || local_widths.empty()) {
    throw ConfigError("embedding: conv width lists must be non-empty");
  }
  for (std::size_t w : backbone_widths) {
    if (w == 0) throw ConfigError("embedding: zero backbone width");
  }
  for (std::size_t w : local_widths) {
    if (w == 0) throw ConfigError("embedding: zero local width");
  }
  if (attention_heads == 0 || local_dim() % attention_heads != 0) {
    throw ConfigError("embedding: local feature width " + std::to_string(local_dim()) +
                      " is not divisible by " + std::to_string(attention_heads) +
                      " attention heads");
  }
  if (attention_key_dim == 0 || local_hidden == 0) {
    throw ConfigError("embedding: attention key dim and local hidden width must be positive");
  }
}

Tensor to_chw(const geometry::Image& img) {
  if (img.channels != 3) throw ValidationError("expected a 3-channel image");
  Tensor t({3, img.height, img.width});
  const std::size_t plane = img.height * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) t[ch * plane + i] = img.pixels[i * 3 + ch];
  }
  return t;
}

Backbone::Backbone(const std::string& name, const std::vector<std::size_t>& widths, Rng& rng) {
  std::size_t in = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(name + ".conv" + std::to_string(i), in, widths[i], 3, 2, 1, rng);
    in = widths[i];
  }
}

Var Backbone::forward(Tape& tape, Var image) {
  Var x = image;
  for (nn::Conv2d& conv : layers_) x = nn::relu(conv.forward(tape, x));
  return nn::mean_trailing(x);
}

void Backbone::parameters(ParameterList& out) {
  for (nn::Conv2d& conv : layers_) conv.parameters(out);
}

void Backbone::copy_from(const Backbone& other) {
  if (other.layers_.size() != layers_.size()) {
    throw ConfigError("backbone copy: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const nn::Conv2d& src = other.layers_[i];
    if (src.weight().value.shape() != layers_[i].weight().value.shape()) {
      throw ConfigError("backbone copy: layer shape mismatch");
    }
    layers_[i].weight().value = src.weight().value;
    layers_[i].bias().value = src.bias().value;
  }
}

void Backbone::set_frozen(bool frozen) {
  for (nn::Conv2d& conv : layers_) {
    conv.weight().frozen = frozen;
    conv.bias().frozen = frozen;
  }
}

GlobalBranch::GlobalBranch(const EmbeddingConfig& config, Rng& rng)
    : face_("global.face", config.backbone_widths, rng),
      identity_("global.identity", config.backbone_widths, rng),
      reducer_("global.reducer", config.backbone_dim(), kEmbedDim, false, rng) {
  identity_.copy_from(face_);
  identity_.set_frozen(true);
}

GlobalBranch::Output GlobalBranch::forward(Tape& tape, Var image) {
  Output out;
  out.face = face_.forward(tape, image);
  out.identity = identity_.forward(tape, image);
  out.g_exp = reducer_.forward(tape, nn::sub(out.face, out.identity));
  return out;
}

void GlobalBranch::parameters(ParameterList& out) {
  face_.parameters(out);
  reducer_.parameters(out);
}

void GlobalBranch::identity_parameters(ParameterList& out) { identity_.parameters(out); }

SelfAttention2d::SelfAttention2d(const std::string& name, std::size_t channels,
                                 std::size_t key_dim, std::size_t heads, Rng& rng)
    : channels_(channels), key_dim_(key_dim), heads_(heads) {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("self-attention: " + std::to_string(channels) +
                      " channels not divisible by " + std::to_string(heads) + " heads");
  }
  const float bound = 1.0f / std::sqrt(static_cast<float>(channels));
  auto make = [&](const std::string& suffix, std::size_t rows, bool zero) {
    Parameter w(name + "." + suffix + ".weight", Tensor({rows, channels}));
    if (!zero) nn::init_uniform(w.value, rng, bound);
    return w;
  };
  q_w_ = make("query", heads * key_dim, false);
  k_w_ = make("key", heads * key_dim, false);
  v_w_ = make("value", channels, false);
  out_w_ = make("out", channels, true);
  q_b_ = Parameter(name + ".query.bias", Tensor({heads * key_dim}));
  k_b_ = Parameter(name + ".key.bias", Tensor({heads * key_dim}));
  v_b_ = Parameter(name + ".value.bias", Tensor({channels}));
  out_b_ = Parameter(name + ".out.bias", Tensor({channels}));
}

Var SelfAttention2d::forward(Tape& tape, Var x, std::vector<Tensor>* attention) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) != channels_) {
    throw ValidationError("self-attention: expected [" + std::to_string(channels_) +
                          ", H, W], got " + nn::to_string(xv.shape()));
  }
  const std::size_t hw = xv.dim(1) * xv.dim(2);
  const Var flat = nn::reshape(x, {channels_, hw});
  // [rows, C] x [C, HW] + bias
  auto project = [&](Parameter& w, Parameter& b) {
    return nn::add_channel_bias(nn::matmul(tape.parameter(w), flat), tape.parameter(b));
  };
  const Var q = project(q_w_, q_b_);
  const Var k = project(k_w_, k_b_);
  const Var v = project(v_w_, v_b_);
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(key_dim_));
  const std::size_t head_c = channels_ / heads_;

  // Heads are row blocks; work on transposes to slice columns.
  const Var qt = nn::transpose(q), kt = nn::transpose(k), vt = nn::transpose(v);
  std::vector<Var> head_out;
  if (attention != nullptr) attention->clear();
  for (std::size_t h = 0; h < heads_; ++h) {
    const Var qh = nn::slice_cols(qt, h * key_dim_, (h + 1) * key_dim_);  // [HW, dk]
    const Var kh = nn::slice_cols(kt, h * key_dim_, (h + 1) * key_dim_);
    const Var vh = nn::slice_cols(vt, h * head_c, (h + 1) * head_c);      // [HW, C/h]
    const Var a = nn::softmax_rows(nn::scale(nn::matmul_nt(qh, kh), inv_sqrt));
    if (attention != nullptr) attention->push_back(a.value());
    head_out.push_back(nn::matmul(a, vh));  // [HW, C/h]
  }
  const Var mixed = heads_ == 1 ? head_out.front() : nn::concat_cols(head_out);  // [HW, C]
  const Var projected = nn::add_row_bias(nn::matmul_nt(mixed, tape.parameter(out_w_)),
                                         tape.parameter(out_b_));  // [HW, C]
  return nn::add(x, nn::reshape(nn::transpose(projected), xv.shape()));
}

void SelfAttention2d::parameters(ParameterList& out) {
  for (Parameter* p : {&q_w_, &q_b_, &k_w_, &k_b_, &v_w_, &v_b_, &out_w_, &out_b_}) {
    out.push_back(p);
  }
}

LocalExtractor::LocalExtractor(const std::string& name, const EmbeddingConfig& config, Rng& rng) {
  std::size_t in = 3;
  for (std::size_t i = 0; i < config.local_widths.size(); ++i) {
    convs_.emplace_back(name + ".conv" + std::to_string(i), in, config.local_widths[i], 3, 2, 1,
                        rng);
    in = config.local_widths[i];
  }
  attention_ = SelfAttention2d(name + ".attention", in, config.attention_key_dim,
                               config.attention_heads, rng);
}

Var LocalExtractor::forward(Tape& tape, Var crop, std::vector<Tensor>* attention) {
  const Tensor& cv = crop.value();
  if (cv.rank() != 3 || cv.dim(0) != 3 || cv.dim(1) != geometry::kCropSide ||
      cv.dim(2) != geometry::kCropSide) {
    throw ValidationError("local extractor expects a [3, 96, 96] crop, got " +
                          nn::to_string(cv.shape()));
  }
  Var x = crop;
  for (nn::Conv2d& conv : convs_) x = nn::relu(conv.forward(tape, x));
  return nn::mean_trailing(attention_.forward(tape, x, attention));
}

void LocalExtractor::parameters(ParameterList& out) {
  for (nn::Conv2d& conv : convs_) conv.parameters(out);
  attention_.parameters(out);
}

LocalBranch::LocalBranch(const EmbeddingConfig& config, Rng& rng) {
  extractors_.reserve(geometry::kCropCount);
  for (geometry::CropName n : geometry::kAllCrops) {
    extractors_.emplace_back("local." + std::string(geometry::to_string(n)), config, rng);
  }
  hidden_ = nn::Linear("local.head.hidden", geometry::kCropCount * config.local_dim(),
                       config.local_hidden, true, rng);
  out_ = nn::Linear("local.head.out", config.local_hidden, kEmbedDim, true, rng);
}

Var LocalBranch::forward(Tape& tape, const geometry::CropSet& crops) {
  std::vector<Var> feats;
  for (std::size_t i = 0; i < geometry::kCropCount; ++i) {
    const Var crop = tape.constant(to_chw(crops.get(geometry::kAllCrops[i])));
    feats.push_back(extractors_[i].forward(tape, crop));
  }
  return out_.forward(tape, nn::relu(hidden_.forward(tape, nn::concat(feats))));
}

void LocalBranch::parameters(ParameterList& out) {
  for (LocalExtractor& e : extractors_) e.parameters(out);
  hidden_.parameters(out);
  out_.parameters(out);
}

EmbeddingNet::EmbeddingNet(const EmbeddingConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  global_ = GlobalBranch(config_, rng);
  local_ = LocalBranch(config_, rng);
}

EmbeddingVars EmbeddingNet::forward(Tape& tape, Var face, const geometry::CropSet& crops) {
  EmbeddingVars out;
  out.g_exp = global_.forward(tape, face).g_exp;
  out.l_exp = local_.forward(tape, crops);
  out.e_exp = nn::add(out.g_exp, out.l_exp);
  return out;
}

ExpressionEmbedding EmbeddingNet::embed(const geometry::Image& face,
                                        const geometry::CropSet& crops) {
  Tape tape;
  const EmbeddingVars v = forward(tape, tape.constant(to_chw(face)), crops);
  ExpressionEmbedding e;
  for (std::size_t i = 0; i < kEmbedDim; ++i) {
    e.g_exp[i] = v.g_exp.value()[i];
    e.l_exp[i] = v.l_exp.value()[i];
    e.e_exp[i] = v.e_exp.value()[i];
  }
  return e;
}

void EmbeddingNet::parameters(ParameterList& out) {
  global_.parameters(out);
  local_.parameters(out);
}

void EmbeddingNet::identity_parameters(ParameterList& out) { global_.identity_parameters(out); }

}  // namespace glee::embed
