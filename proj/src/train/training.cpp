#include "glee/train/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"
#include "glee/embed/triplet.hpp"
#include "glee/eval/metrics.hpp"
#include "glee/morph/fit.hpp"
#include "glee/nn/optim.hpp"

namespace glee::train {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<double> widen(const nn::Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

// Restores frozen flags on scope exit.
class FreezeGuard {
 public:
  FreezeGuard(nn::ParameterList params, bool freeze) : params_(std::move(params)) {
    for (nn::Parameter* p : params_) {
      saved_.push_back(p->frozen);
      if (freeze) p->frozen = true;
    }
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->frozen = saved_[i];
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  nn::ParameterList params_;
  std::vector<bool> saved_;
};

std::vector<double> embed_vector(GleeModel& model, const FaceSample& s) {
  nn::Tape tape;
  return widen(model.embed(tape, s).e_exp.value());
}

double squared_distance_normalized(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] / na - b[i] / nb;
    d += diff * diff;
  }
  return d;
}

}  // namespace

TrainResult pretrain(GleeModel& model, const TripletManifest& triplets, const TrainConfig& config,
                     const EpochCallback& on_epoch, const StepCallback& on_step) {
  config.validate();
  if (config.stage != Stage::pretrain) throw ConfigError("pretrain: config stage is not pretrain");
  if (triplets.records.empty()) throw ValidationError("pretrain: triplet manifest is empty");

  FaceCache cache(model.config().canonical_size);
  nn::Sgd opt(model.embedding_parameters(), {config.learning_rate, config.momentum});
  Rng rng(config.seed);
  const double margin = model.config().embedding.margin;
  const std::size_t n = triplets.records.size();

  TrainResult result;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled(n, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);

      // Distinct images of the batch, in first-use order.
      std::vector<const ImageRef*> images;
      std::unordered_map<std::string, std::size_t> slot;
      std::vector<std::array<std::size_t, 3>> members;
      for (std::size_t t = start; t < end; ++t) {
        const TripletRecord& r = triplets.records[order[t]];
        std::array<std::size_t, 3> ids{};
        const ImageRef* refs[3] = {&r.anchor, &r.positive, &r.negative};
        for (int k = 0; k < 3; ++k) {
          auto [it, fresh] = slot.emplace(refs[k]->image_path, images.size());
          if (fresh) images.push_back(refs[k]);
          ids[k] = it->second;
        }
        members.push_back(ids);
      }

      std::vector<std::vector<double>> emb;
      emb.reserve(images.size());
      for (const ImageRef* ref : images) emb.push_back(embed_vector(model, cache.get(*ref)));

      std::vector<std::vector<double>> grad(images.size(),
                                            std::vector<double>(embed::kEmbedDim, 0.0));
      for (std::size_t t = 0; t < members.size(); ++t) {
        const auto& ids = members[t];
        embed::TripletGrad g;
        double loss = 0.0;
        try {
          loss = embed::triplet_loss(emb[ids[0]], emb[ids[1]], emb[ids[2]], margin, &g);
        } catch (const NumericalError& e) {
          throw NumericalError("pretrain: epoch " + std::to_string(epoch) + " batch " +
                               std::to_string(batch) + " triplet " +
                               std::to_string(order[start + t]) + ": " + e.what());
        }
        if (!std::isfinite(loss)) {
          throw NumericalError("pretrain: non-finite loss at epoch " + std::to_string(epoch) +
                               " batch " + std::to_string(batch) + " triplet " +
                               std::to_string(order[start + t]));
        }
        loss_sum += loss;
        const std::vector<double>* parts[3] = {&g.anchor, &g.positive, &g.negative};
        for (int k = 0; k < 3; ++k) {
          for (std::size_t d = 0; d < embed::kEmbedDim; ++d) {
            grad[ids[k]][d] += inv_b * (*parts[k])[d];
          }
        }
      }

      opt.zero_grad();
      for (std::size_t i = 0; i < images.size(); ++i) {
        if (std::all_of(grad[i].begin(), grad[i].end(), [](double v) { return v == 0.0; })) {
          continue;
        }
        nn::Tape tape;
        const nn::Var e = model.embed(tape, cache.get(*images[i])).e_exp;
        nn::Tensor seed({embed::kEmbedDim});
        for (std::size_t d = 0; d < embed::kEmbedDim; ++d) seed[d] = static_cast<float>(grad[i][d]);
        tape.backward(e, seed);
      }
      opt.step(1.0f);
      ++steps;
      if (on_step) on_step({epoch, steps});
    }
    const double mean = loss_sum / static_cast<double>(n);
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch({epoch, mean, -1.0});
  }
  return result;
}

double ranking_accuracy(GleeModel& model, const TripletManifest& triplets) {
  if (triplets.records.empty()) throw ValidationError("ranking accuracy: empty manifest");
  FaceCache cache(model.config().canonical_size);
  std::map<std::string, std::vector<double>> emb;
  auto get = [&](const ImageRef& ref) -> const std::vector<double>& {
    auto it = emb.find(ref.image_path);
    if (it == emb.end()) it = emb.emplace(ref.image_path, embed_vector(model, cache.get(ref))).first;
    return it->second;
  };
  std::size_t correct = 0;
  for (const TripletRecord& r : triplets.records) {
    const std::vector<double>& a = get(r.anchor);
    const std::vector<double>& p = get(r.positive);
    const std::vector<double>& q = get(r.negative);
    if (squared_distance_normalized(a, p) < squared_distance_normalized(a, q)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(triplets.records.size());
}

std::vector<std::vector<double>> lookup_coefficients(const AUManifest& data,
                                                     const morph::CoefficientTable& table) {
  std::vector<std::vector<double>> out;
  out.reserve(data.records.size());
  for (const AURecord& r : data.records) {
    const auto it = table.find(r.frame_id);
    if (it == table.end()) {
      throw ValidationError("no expression coefficients for frame " + r.frame_id);
    }
    const Eigen::VectorXd& f = it->second.f_exp;
    out.emplace_back(f.data(), f.data() + f.size());
  }
  return out;
}

TrainResult finetune(GleeModel& model, const AUManifest& data,
                     const morph::CoefficientTable& coefficients, const au::DatasetStats& stats,
                     const TrainConfig& config, const EpochCallback& on_epoch,
                     const StepCallback& on_step) {
  config.validate();
  if (config.stage != Stage::finetune) throw ConfigError("finetune: config stage is not finetune");
  data.validate();
  if (data.records.empty()) throw ValidationError("finetune: AU manifest is empty");
  if (data.au_count != model.config().classifier.au_count) {
    throw ValidationError("N_a mismatch: manifest has " + std::to_string(data.au_count) +
                          " AUs, model has " + std::to_string(model.config().classifier.au_count));
  }
  if (stats.r.size() != data.au_count) {
    throw ValidationError("finetune: stats cover " + std::to_string(stats.r.size()) +
                          " AUs, manifest has " + std::to_string(data.au_count));
  }
  stats.validate();
  const std::vector<std::vector<double>> f_exp = lookup_coefficients(data, coefficients);

  const std::size_t n = data.records.size();
  std::vector<FaceSample> samples;
  samples.reserve(n);
  for (const AURecord& r : data.records) {
    samples.push_back(load_face_sample({r.image_path, r.landmark_path},
                                       model.config().canonical_size));
  }

  FreezeGuard guard(model.embedding_parameters(), config.fixed_branches);
  nn::ParameterList params = model.classifier_parameters();
  if (!config.fixed_branches) {
    const nn::ParameterList e = model.embedding_parameters();
    params.insert(params.end(), e.begin(), e.end());
  }
  nn::Sgd opt(params, {config.learning_rate, config.momentum});

  // With fixed branches every embedding is a constant.
  std::vector<nn::Tensor> fixed_e;
  if (config.fixed_branches) {
    for (const FaceSample& s : samples) {
      nn::Tape tape;
      fixed_e.push_back(model.embed(tape, s).e_exp.value());
    }
  }

  std::vector<std::vector<int>> labels;
  for (const AURecord& r : data.records) labels.push_back(r.labels);

  Rng rng(config.seed);
  TrainResult result;
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled(n, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      opt.zero_grad();
      for (std::size_t t = start; t < end; ++t) {
        const std::size_t i = order[t];
        nn::Tape tape;
        const nn::Var e = config.fixed_branches ? tape.constant(fixed_e[i])
                                                : model.embed(tape, samples[i]).e_exp;
        const au::ClassifierVars cv =
            model.classifier().forward(tape, joint_feature(e, f_exp[i]));
        const nn::Var loss = au::total_loss(cv, labels[i], stats);
        const double v = loss.value()[0];
        if (!std::isfinite(v)) {
          throw NumericalError("finetune: non-finite loss at epoch " + std::to_string(epoch) +
                               " frame " + data.records[i].frame_id);
        }
        loss_sum += v;
        tape.backward(loss);
      }
      opt.step(1.0f / static_cast<float>(end - start));
      ++steps;
      if (on_step) on_step({epoch, steps});
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(n), -1.0};
    if (config.early_stop_f1) {
      std::vector<std::vector<int>> preds;
      for (std::size_t i = 0; i < n; ++i) {
        nn::Tape tape;
        const nn::Var e = config.fixed_branches ? tape.constant(fixed_e[i])
                                                : model.embed(tape, samples[i]).e_exp;
        const au::ClassifierVars cv = model.classifier().forward(tape, joint_feature(e, f_exp[i]));
        const au::AUPrediction p = au::to_prediction(cv.initial_logits.value(), cv.final_logits.value());
        preds.emplace_back(p.occurrences.begin(), p.occurrences.end());
      }
      log.train_f1 = eval::f1_per_au(preds, labels).average_f1;
      result.train_f1_history.push_back(log.train_f1);
    }
    result.loss_history.push_back(log.mean_loss);
    if (on_epoch) on_epoch(log);
    if (config.early_stop_f1 && log.train_f1 >= *config.early_stop_f1) {
      result.stopped_early = epoch + 1 < config.epochs;
      break;
    }
  }
  return result;
}

au::DatasetStats compute_stats(const AUManifest& data) {
  if (data.records.empty()) throw ValidationError("stats: AU manifest is empty");
  data.validate();
  au::DatasetStats s;
  const double n = static_cast<double>(data.records.size());
  for (std::size_t i = 0; i < data.au_count; ++i) {
    std::size_t count = 0;
    for (const AURecord& r : data.records) count += r.labels[i] == 1 ? 1 : 0;
    s.r.push_back(std::max(static_cast<double>(count) / n, au::kRatioClamp));
  }
  return s;
}

std::vector<Fold> make_folds(const AUManifest& data, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("folds: k must be positive");
  std::set<std::string> subject_set;
  for (const AURecord& r : data.records) subject_set.insert(r.subject_id);
  if (subject_set.size() < k) {
    throw ValidationError("folds: " + std::to_string(subject_set.size()) + " subjects, need at least " +
                          std::to_string(k));
  }
  unsigned char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<unsigned char>(seed >> (8 * i));
  const std::uint64_t basis = io::fnv1a(seed_bytes, 8);
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (const std::string& s : subject_set) keyed.emplace_back(io::fnv1a(s, basis), s);
  std::sort(keyed.begin(), keyed.end());

  std::map<std::string, std::size_t> group;
  for (std::size_t i = 0; i < keyed.size(); ++i) group[keyed[i].second] = i % k;

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    Fold& fold = folds[f];
    fold.train.au_count = fold.test.au_count = data.au_count;
    fold.train.notes = fold.test.notes = data.notes;
    for (const auto& [subject, g] : group) {
      if (g == f) fold.test_subjects.push_back(subject);
    }
    for (const AURecord& r : data.records) {
      (group.at(r.subject_id) == f ? fold.test : fold.train).records.push_back(r);
    }
  }
  return folds;
}

std::vector<morph::CoefficientRow> precompute_coefficients(const AUManifest& data,
                                                           const morph::MorphableModel& model,
                                                           const morph::FitConfig& config) {
  config.validate();
  std::vector<morph::CoefficientRow> rows;
  rows.reserve(data.records.size());
  for (const AURecord& r : data.records) {
    try {
      const geometry::ImageSize size = geometry::read_netpbm_size(r.image_path);
      const geometry::LandmarkSet68 lm = geometry::read_landmarks(r.landmark_path, size);
      rows.push_back(morph::make_row(r.frame_id, morph::fit_coefficients(model, lm, config)));
    } catch (const Error& e) {
      rows.push_back(
          morph::failed_row(r.frame_id, model.shape_count(), model.expr_count(), e.what()));
    }
  }
  return rows;
}

}  // namespace glee::train
