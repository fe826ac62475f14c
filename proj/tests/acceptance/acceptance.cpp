// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "glee/au/loss.hpp"
#include "glee/common/error.hpp"
#include "glee/embed/triplet.hpp"
#include "glee/eval/evaluate.hpp"
#include "glee/geometry/crops.hpp"
#include "glee/morph/fit.hpp"
#include "glee/morph/synthetic.hpp"
#include "glee/train/checkpoint.hpp"
#include "glee/train/fixtures.hpp"
#include "glee/train/training.hpp"
#include "support.hpp"

using namespace glee;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
};

// Detail lines go to stdout ahead of the verdict line.
void note(const std::string& text) { std::printf("    %s\n", text.c_str()); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run_criterion(int id, const std::string& name, double budget_s,
                  const std::function<Outcome()>& body) {
  std::printf("criterion %d: %s\n", id, name.c_str());
  std::fflush(stdout);
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.summary = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  std::string timing = fmt("%.2f s", secs);
  if (budget_s > 0.0) {
    const bool in_time = secs < budget_s;
    timing += (in_time ? " < " : " >= ") + fmt("%g s", budget_s);
    out.pass = out.pass && in_time;
  }
  std::printf("[%s] criterion %d %s: %s (%s)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
              out.summary.c_str(), timing.c_str());
  std::fflush(stdout);
  return out.pass ? 0 : 1;
}

bool same_bits(const nn::Tensor& a, const nn::Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0;
}

std::vector<nn::Tensor> values_of(const nn::ParameterList& ps) {
  std::vector<nn::Tensor> out;
  for (const nn::Parameter* p : ps) out.push_back(p->value);
  return out;
}

bool unchanged(const nn::ParameterList& ps, const std::vector<nn::Tensor>& ref) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!same_bits(ps[i]->value, ref[i])) return false;
  }
  return true;
}

// ---- 1. crop geometry --------------------------------------------------

std::size_t ceil_frac(std::size_t n, std::size_t num, std::size_t den) {
  return (n * num + den - 1) / den;
}

// Convention table: *34 keeps ceil(3/4) of an extent, *12 keeps ceil(1/2),
// anchored on the named side(s); unnamed axes keep the full extent.
geometry::Rect expected_rect(const std::string& name, std::size_t h, std::size_t w) {
  const bool three_quarter = name.substr(name.size() - 2) == "34";
  const std::size_t kr = three_quarter ? ceil_frac(h, 3, 4) : ceil_frac(h, 1, 2);
  const std::size_t kc = three_quarter ? ceil_frac(w, 3, 4) : ceil_frac(w, 1, 2);
  const std::string sides = name.substr(0, name.size() - 2);
  geometry::Rect r{0, h, 0, w};
  for (char s : sides) {
    if (s == 'L') r.col_end = kc;
    if (s == 'R') r.col_start = w - kc;
    if (s == 'T') r.row_end = kr;
    if (s == 'B') r.row_start = h - kr;
  }
  return r;
}

Outcome crop_geometry() {
  const std::vector<std::string> names{"L34", "R34", "T34", "B34", "L12", "R12", "T12", "B12",
                                       "TL34", "TR34", "TL12", "TR12", "BL34", "BR34", "BL12",
                                       "BR12"};
  const std::size_t sizes[] = {96, 128, 176};
  std::size_t exact = 0, total = 0;
  for (std::size_t h : sizes) {
    for (std::size_t w : sizes) {
      for (const std::string& n : names) {
        ++total;
        if (geometry::crop_region(n, h, w) == expected_rect(n, h, w)) {
          ++exact;
        } else {
          note("mismatch " + n + " at " + std::to_string(h) + "x" + std::to_string(w));
        }
      }
    }
  }

  Rng rng(101);
  double worst = 0.0;
  for (std::size_t h : sizes) {
    for (std::size_t w : sizes) {
      const geometry::Image face = test::random_image(h, w, rng);
      const geometry::CropSet direct = geometry::crop_parts(face);
      const geometry::CropSet flipped = geometry::crop_parts(geometry::mirror_horizontal(face));
      for (geometry::CropName n : geometry::kAllCrops) {
        const geometry::Image a = flipped.get(geometry::mirrored(n));
        const geometry::Image b = geometry::mirror_horizontal(direct.get(n));
        for (std::size_t i = 0; i < a.pixels.size(); ++i) {
          worst = std::max(worst, static_cast<double>(std::abs(a.pixels[i] - b.pixels[i])));
        }
      }
    }
  }
  Outcome o;
  o.pass = exact == total && worst <= 1e-6;
  o.summary = std::to_string(exact) + "/" + std::to_string(total) +
              " rectangles exact; mirror consistency max deviation " + fmt("%.2e", worst) +
              " (tolerance 1e-6)";
  return o;
}

// ---- 2. morphable-model round trip -------------------------------------

Outcome morph_round_trip() {
  const morph::MorphableModel model = morph::make_synthetic_model();
  const morph::SceneConfig scene;  // |f|_inf <= 1, mild pose
  Rng rng(2024);
  const std::size_t scenes = 50;
  std::size_t accurate = 0, monotone = 0;
  double worst_rmse = 0.0, worst_px = 0.0;
  for (std::size_t i = 0; i < scenes; ++i) {
    const morph::SyntheticScene s = morph::make_scene(model, scene, rng);
    const morph::FitResult fit = morph::fit_coefficients(model, s.landmarks, morph::FitConfig{});
    const double rmse =
        std::sqrt((fit.f_exp - s.f_exp).squaredNorm() / static_cast<double>(s.f_exp.size()));
    const Eigen::MatrixXd proj = morph::project_landmarks(model, fit.f_s, fit.f_exp, fit.pose);
    double px = 0.0;
    for (std::size_t k = 0; k < geometry::kLandmarkCount; ++k) {
      const double dx = proj(static_cast<Eigen::Index>(k), 0) - s.landmarks.points[k].x;
      const double dy = proj(static_cast<Eigen::Index>(k), 1) - s.landmarks.points[k].y;
      px += std::hypot(dx, dy);
    }
    px /= static_cast<double>(geometry::kLandmarkCount);
    bool non_increasing = true;
    for (std::size_t k = 1; k < fit.cost_history.size(); ++k) {
      if (fit.cost_history[k] > fit.cost_history[k - 1]) non_increasing = false;
    }
    worst_rmse = std::max(worst_rmse, rmse);
    worst_px = std::max(worst_px, px);
    if (rmse < 0.05 && px < 0.5) ++accurate;
    if (non_increasing) ++monotone;
  }
  const double frac = static_cast<double>(accurate) / static_cast<double>(scenes);
  Outcome o;
  o.pass = frac >= 0.95 && monotone == scenes;
  o.summary = std::to_string(accurate) + "/50 scenes with f_exp RMSE < 0.05 and reprojection < 0.5 px (" +
              fmt("%.0f%%", 100.0 * frac) + ", need >= 95%); worst RMSE " + fmt("%.2e", worst_rmse) +
              ", worst reprojection " + fmt("%.3f px", worst_px) + "; non-increasing LM cost " +
              std::to_string(monotone) + "/50 (need 100%)";
  return o;
}

// ---- 3. loss identities ------------------------------------------------

// Entries are integers in [-2^23, 2^23] times 2^-20, so k x is exact for
// the tested k.
std::vector<double> dyadic_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) {
    const auto m = static_cast<std::int64_t>(rng.below(1ULL << 24)) - (1LL << 23);
    x = std::ldexp(static_cast<double>(m), -20);
  }
  return v;
}

Outcome loss_identities() {
  Rng rng(3);
  bool coincident_ok = true;
  for (double m : {0.2, 0.5, 1.0, 0.1}) {
    std::vector<double> x(16);
    for (double& v : x) v = rng.normal();
    const double loss = embed::triplet_loss(x, x, x, m);
    if (loss != 2.0 * m) coincident_ok = false;
  }

  au::DatasetStats stats;
  stats.r = {0.5};
  const std::vector<double> p{0.5};
  const std::vector<int> g{1};
  const double ce = au::weighted_ce(p, g, stats);
  const double ce_err = std::abs(ce - 2.0 * std::log(2.0));

  std::size_t exact = 0, checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> a = dyadic_vec(rng, 16), pp = dyadic_vec(rng, 16),
                              n = dyadic_vec(rng, 16);
    const double base = embed::triplet_loss(a, pp, n, 0.2);
    for (double k : {0.5, 3.0, 100.0}) {
      auto scaled = [k](std::vector<double> v) {
        for (double& x : v) x *= k;
        return v;
      };
      ++checked;
      if (embed::triplet_loss(scaled(a), scaled(pp), scaled(n), 0.2) == base) ++exact;
    }
  }
  Outcome o;
  o.pass = coincident_ok && ce_err <= 1e-9 && exact == checked;
  o.summary = std::string("coincident triplet = 2m exactly: ") + (coincident_ok ? "yes" : "no") +
              "; weighted CE hand case |L - 2 ln 2| = " + fmt("%.1e", ce_err) +
              " (tolerance 1e-9); scale invariance exact for k in {0.5, 3, 100}: " +
              std::to_string(exact) + "/" + std::to_string(checked);
  return o;
}

// ---- 4. gradient checks ------------------------------------------------

double relative_error(const std::vector<double>& num, const std::vector<double>& ana) {
  double diff = 0.0, nn_ = 0.0, na = 0.0;
  for (std::size_t i = 0; i < num.size(); ++i) {
    diff += (num[i] - ana[i]) * (num[i] - ana[i]);
    nn_ += num[i] * num[i];
    na += ana[i] * ana[i];
  }
  const double scale = std::max(std::sqrt(nn_), std::sqrt(na));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

Outcome gradient_checks() {
  const double h = 1e-5;
  Rng rng(4);
  double worst_triplet = 0.0, worst_ce = 0.0;
  std::size_t triplet_ok = 0, triplet_active = 0, ce_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(48);
    for (std::size_t i = 0; i < 48; ++i) x[i] = rng.normal() * (0.5 + rng.uniform());
    const double margin = 0.2;
    auto loss = [&](const std::vector<double>& v) {
      return embed::triplet_loss(std::span(v).subspan(0, 16), std::span(v).subspan(16, 16),
                                 std::span(v).subspan(32, 16), margin);
    };
    embed::TripletGrad g;
    embed::triplet_loss(std::span(x).subspan(0, 16), std::span(x).subspan(16, 16),
                        std::span(x).subspan(32, 16), margin, &g);
    std::vector<double> ana = g.anchor;
    ana.insert(ana.end(), g.positive.begin(), g.positive.end());
    ana.insert(ana.end(), g.negative.begin(), g.negative.end());
    std::vector<double> num(48);
    for (std::size_t i = 0; i < 48; ++i) {
      std::vector<double> up = x, dn = x;
      up[i] += h;
      dn[i] -= h;
      num[i] = (loss(up) - loss(dn)) / (2.0 * h);
    }
    const double err = relative_error(num, ana);
    worst_triplet = std::max(worst_triplet, err);
    if (err < 1e-4) ++triplet_ok;
    if (std::any_of(ana.begin(), ana.end(), [](double v) { return v != 0.0; })) ++triplet_active;
  }

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_au = 12;
    std::vector<double> z(n_au);
    std::vector<int> labels(n_au);
    au::DatasetStats stats;
    for (std::size_t i = 0; i < n_au; ++i) {
      z[i] = rng.uniform(-4.0, 4.0);
      labels[i] = static_cast<int>(rng.below(2));
      stats.r.push_back(rng.uniform(1e-3, 1.0));
    }
    std::vector<double> ana;
    au::weighted_ce_logits(z, labels, stats, &ana);
    std::vector<double> num(n_au);
    for (std::size_t i = 0; i < n_au; ++i) {
      std::vector<double> up = z, dn = z;
      up[i] += h;
      dn[i] -= h;
      num[i] = (au::weighted_ce_logits(up, labels, stats) -
                au::weighted_ce_logits(dn, labels, stats)) /
               (2.0 * h);
    }
    const double err = relative_error(num, ana);
    worst_ce = std::max(worst_ce, err);
    if (err < 1e-4) ++ce_ok;
  }
  Outcome o;
  o.pass = triplet_ok == 100 && ce_ok == 100;
  o.summary = "triplet " + std::to_string(triplet_ok) + "/100 (" + std::to_string(triplet_active) +
              " with an active hinge), worst relative error " + fmt("%.2e", worst_triplet) +
              "; weighted CE " + std::to_string(ce_ok) + "/100, worst " + fmt("%.2e", worst_ce) +
              " (central differences, step 1e-5, tolerance 1e-4)";
  return o;
}

// ---- 5. architecture invariants ----------------------------------------

// Recomputes G_exp and L_exp through the two branches separately and checks
// the model's E_exp against their float sum.
bool sum_holds(train::GleeModel& model, const train::FaceSample& s) {
  nn::Tape t1, t2, t3;
  const nn::Tensor g = model.embedding().global().forward(t1, t1.constant(s.face)).g_exp.value();
  const nn::Tensor l = model.embedding().local().forward(t2, s.crops).value();
  const nn::Tensor e = model.embed(t3, s).e_exp.value();
  for (std::size_t d = 0; d < embed::kEmbedDim; ++d) {
    const float sum = g[d] + l[d];
    const float got = e[d];
    if (std::memcmp(&sum, &got, sizeof(float)) != 0) return false;
  }
  return true;
}

Outcome architecture() {
  test::TempDir dir("acc5");
  train::ClusterFixtureConfig cc;
  cc.train_triplets = 30;
  cc.heldout_triplets = 2;
  cc.pool_per_cluster = 6;
  cc.heldout_pool_per_cluster = 2;
  const train::ClusterFixture clusters = train::write_cluster_triplets(dir.str("clusters"), cc);
  const train::TripletManifest triplets = train::read_triplet_manifest(clusters.train_manifest);
  train::PlantedFixtureConfig pc;
  pc.frames = 12;
  pc.subjects = 3;
  const train::PlantedFixture planted = train::write_planted_au(dir.str("planted"), pc);
  const train::AUManifest data = train::read_au_manifest(planted.manifest);
  const morph::CoefficientTable table =
      morph::index_by_frame(morph::read_coefficients(planted.coefficients));

  const train::ModelConfig mc;
  train::GleeModel model(mc, 5);
  const train::FaceSample probe = train::load_face_sample(triplets.records[0].anchor, mc.canonical_size);
  const std::vector<nn::Tensor> identity = values_of(model.identity_parameters());
  const std::vector<nn::Tensor> face_start = values_of(model.embedding_parameters());

  std::size_t steps = 0, freeze_ok = 0, sum_ok = 0;
  auto check_step = [&](const train::StepLog&) {
    ++steps;
    if (unchanged(model.identity_parameters(), identity)) ++freeze_ok;
    if (sum_holds(model, probe)) ++sum_ok;
  };
  train::TrainConfig pre = train::TrainConfig::defaults(train::Stage::pretrain);
  pre.epochs = 3;
  pre.batch_size = 10;
  pre.model = mc;
  train::pretrain(model, triplets, pre, {}, check_step);
  const bool moved = !unchanged(model.embedding_parameters(), face_start);

  train::TrainConfig fine = train::TrainConfig::defaults(train::Stage::finetune);
  fine.epochs = 3;
  fine.batch_size = 4;
  fine.model = mc;
  train::finetune(model, data, table, train::compute_stats(data), fine, {}, check_step);
  const bool identity_final = unchanged(model.identity_parameters(), identity);
  note("3-epoch pretrain + 3-epoch finetune: " + std::to_string(steps) + " optimizer steps; trainable "
       "embedding weights moved: " + (moved ? "yes" : "no"));

  // Encoder permutation equivariance and attention rows.
  Rng rng(55);
  au::AuClassifier& clf = model.classifier();
  const std::size_t n_au = clf.config().au_count, d = clf.config().token_dim;
  double worst_equiv = 0.0, worst_row = 0.0;
  std::size_t rows = 0;
  auto row_check = [&](const nn::Tensor& a) {
    for (std::size_t r = 0; r < a.dim(0); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.dim(1); ++c) s += a[r * a.dim(1) + c];
      worst_row = std::max(worst_row, std::abs(s - 1.0));
      ++rows;
    }
  };
  for (int trial = 0; trial < 10; ++trial) {
    nn::Tensor tokens({n_au, d});
    for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<float>(rng.normal());
    std::vector<std::size_t> perm(n_au);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n_au; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    nn::Tensor permuted({n_au, d});
    for (std::size_t i = 0; i < n_au; ++i) {
      for (std::size_t c = 0; c < d; ++c) permuted[i * d + c] = tokens[perm[i] * d + c];
    }
    nn::Tape t1, t2;
    std::vector<std::vector<nn::Tensor>> attention;
    const nn::Tensor out = clf.encode(t1, t1.constant(tokens), &attention).value();
    const nn::Tensor out_p = clf.encode(t2, t2.constant(permuted)).value();
    for (std::size_t i = 0; i < n_au; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        worst_equiv = std::max(
            worst_equiv, static_cast<double>(std::abs(out_p[i * d + c] - out[perm[i] * d + c])));
      }
    }
    for (const auto& layer : attention) {
      for (const nn::Tensor& a : layer) row_check(a);
    }
  }
  for (geometry::CropName n : {geometry::CropName::L34, geometry::CropName::TR12}) {
    nn::Tape tape;
    std::vector<nn::Tensor> attention;
    model.embedding().local().extractor(n).forward(tape, tape.constant(embed::to_chw(probe.crops.get(n))),
                                                   &attention);
    for (const nn::Tensor& a : attention) row_check(a);
  }

  Outcome o;
  o.pass = freeze_ok == steps && identity_final && sum_ok == steps && steps > 0 &&
           worst_equiv <= 1e-5 && worst_row <= 1e-6;
  o.summary = "identity frozen bitwise after " + std::to_string(freeze_ok) + "/" +
              std::to_string(steps) + " steps; E = G + L after " + std::to_string(sum_ok) + "/" +
              std::to_string(steps) + " steps; encoder equivariance max deviation " +
              fmt("%.2e", worst_equiv) + " (tolerance 1e-5); " + std::to_string(rows) +
              " attention rows, max |sum - 1| " + fmt("%.2e", worst_row) + " (tolerance 1e-6)";
  return o;
}

// ---- 6. pretraining ----------------------------------------------------

Outcome pretraining() {
  test::TempDir dir("acc6");
  const train::ClusterFixture fx = train::write_cluster_triplets(dir.str("clusters"), {});
  const train::TripletManifest triplets = train::read_triplet_manifest(fx.train_manifest);
  const train::TripletManifest heldout = train::read_triplet_manifest(fx.heldout_manifest);
  const train::TrainConfig cfg = train::TrainConfig::defaults(train::Stage::pretrain);
  train::GleeModel model(cfg.model, cfg.seed);
  const double before = train::ranking_accuracy(model, heldout);
  const train::TrainResult r = train::pretrain(model, triplets, cfg, [](const train::EpochLog& l) {
    note("epoch " + std::to_string(l.epoch) + " mean triplet loss " + fmt("%.5f", l.mean_loss));
  });
  const double after = train::ranking_accuracy(model, heldout);
  Outcome o;
  o.pass = triplets.records.size() == 200 && r.loss_history.size() == 10 &&
           r.loss_history.back() < r.loss_history.front() && after >= 0.95;
  o.summary = std::to_string(triplets.records.size()) + " triplets, SGD lr " +
              fmt("%g", cfg.learning_rate) + " momentum " + fmt("%g", cfg.momentum) + " batch " +
              std::to_string(cfg.batch_size) + ", " + std::to_string(r.loss_history.size()) +
              " epochs; mean loss " + fmt("%.5f", r.loss_history.front()) + " -> " +
              fmt("%.5f", r.loss_history.back()) + "; held-out ranking " + fmt("%.3f", before) +
              " -> " + fmt("%.3f", after) + " (need >= 0.95)";
  return o;
}

// ---- 7. finetuning -----------------------------------------------------

Outcome finetuning() {
  test::TempDir dir("acc7");
  const train::PlantedFixture fx = train::write_planted_au(dir.str("planted"), {});
  const train::AUManifest data = train::read_au_manifest(fx.manifest);

  // Coefficients come from fitting the fixture landmarks, as in the pipeline.
  const std::vector<morph::CoefficientRow> rows =
      train::precompute_coefficients(data, morph::load_model(fx.model), morph::FitConfig{});
  const morph::CoefficientTable table = morph::index_by_frame(rows);
  const au::DatasetStats stats = train::compute_stats(data);

  // Short pretraining run to produce the init checkpoint.
  train::ClusterFixtureConfig cc;
  cc.train_triplets = 30;
  cc.heldout_triplets = 2;
  cc.pool_per_cluster = 6;
  cc.heldout_pool_per_cluster = 2;
  const train::ClusterFixture clusters = train::write_cluster_triplets(dir.str("clusters"), cc);
  train::TrainConfig pre = train::TrainConfig::defaults(train::Stage::pretrain);
  pre.epochs = 1;
  train::GleeModel pre_model(pre.model, pre.seed);
  train::pretrain(pre_model, train::read_triplet_manifest(clusters.train_manifest), pre);
  train::CheckpointMeta meta;
  meta.stage = train::Stage::pretrain;
  meta.au_count = data.au_count;
  meta.model = pre.model;
  train::save_checkpoint(dir.str("pre"), pre_model, meta);

  auto run = [&](bool fresh_start, std::size_t& epochs) {
    train::TrainConfig cfg = train::TrainConfig::defaults(train::Stage::finetune);
    cfg.epochs = 200;
    cfg.batch_size = 2;
    cfg.early_stop_f1 = 1.0;
    cfg.fresh_start = fresh_start;
    train::GleeModel model = train::finetune_init(train::load_checkpoint(dir.str("pre")), cfg,
                                                  data.au_count);
    const train::TrainResult r = train::finetune(model, data, table, stats, cfg);
    epochs = r.loss_history.size();
    return eval::evaluate(model, data, table).report.average_f1;
  };
  std::size_t epochs = 0, ablation_epochs = 0;
  const double f1 = run(false, epochs);
  note("pretrained init: training-set average F1 " + fmt("%.4f", f1) + " after " +
       std::to_string(epochs) + " epochs");
  const double ablation = run(true, ablation_epochs);
  note("w/o pretrain ablation: training-set average F1 " + fmt("%.4f", ablation) + " after " +
       std::to_string(ablation_epochs) + " epochs");
  Outcome o;
  o.pass = data.records.size() == 60 && f1 == 1.0 && epochs <= 200 && std::isfinite(ablation);
  o.summary = std::to_string(data.records.size()) + " frames; training-set average F1 " +
              fmt("%.4f", f1) + " after " + std::to_string(epochs) +
              " epochs (need 1.0 within 200); w/o pretrain ablation F1 " + fmt("%.4f", ablation) +
              " after " + std::to_string(ablation_epochs) + " epochs";
  return o;
}

// ---- 8. evaluation correctness -----------------------------------------

struct Expected {
  std::size_t tp, fp, fn, tn;
  double precision, recall, f1;
};

struct CraftedTable {
  std::vector<std::vector<int>> predictions, labels;
  std::vector<Expected> per_au;
};

std::vector<CraftedTable> crafted_tables() {
  return {
      {{{1}, {0}, {1}}, {{1}, {0}, {1}}, {{2, 0, 0, 1, 1.0, 1.0, 1.0}}},
      {{{1}, {1}, {0}, {0}}, {{1}, {1}, {1}, {0}}, {{2, 0, 1, 1, 1.0, 2.0 / 3.0, 4.0 / 5.0}}},
      {{{0}, {0}}, {{0}, {0}}, {{0, 0, 0, 2, 0.0, 0.0, 1.0}}},
      {{{1}, {0}}, {{0}, {1}}, {{0, 1, 1, 0, 0.0, 0.0, 0.0}}},
      {{{1}, {1}, {1}, {1}}, {{1}, {0}, {0}, {0}}, {{1, 3, 0, 0, 1.0 / 4.0, 1.0, 2.0 / 5.0}}},
      {{{0}, {0}, {0}, {1}}, {{1}, {1}, {1}, {1}}, {{1, 0, 3, 0, 1.0, 1.0 / 4.0, 2.0 / 5.0}}},
      {{{1, 0}, {1, 1}, {0, 1}, {0, 0}},
       {{1, 1}, {0, 1}, {0, 1}, {1, 0}},
       {{1, 1, 1, 1, 0.5, 0.5, 0.5}, {2, 0, 1, 1, 1.0, 2.0 / 3.0, 4.0 / 5.0}}},
      {{{1, 0, 0}, {0, 0, 1}},
       {{1, 0, 1}, {0, 0, 1}},
       {{1, 0, 0, 1, 1.0, 1.0, 1.0}, {0, 0, 0, 2, 0.0, 0.0, 1.0}, {1, 0, 1, 0, 1.0, 0.5, 2.0 / 3.0}}},
      {{{1}, {1}, {1}, {1}, {1}, {1}, {0}, {0}, {0}, {0}},
       {{0}, {0}, {0}, {1}, {1}, {1}, {1}, {1}, {1}, {0}},
       {{3, 3, 3, 1, 0.5, 0.5, 0.5}}},
      {{{1}, {1}, {1}, {0}, {0}, {0}, {0}},
       {{1}, {0}, {0}, {1}, {1}, {1}, {1}},
       {{1, 2, 4, 0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 4.0}}},
  };
}

Outcome evaluation() {
  std::size_t tables_ok = 0;
  const std::vector<CraftedTable> tables = crafted_tables();
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const CraftedTable& c = tables[t];
    const eval::EvalReport r = eval::f1_per_au(c.predictions, c.labels);
    bool ok = r.per_au.size() == c.per_au.size();
    double mean = 0.0;
    for (std::size_t i = 0; ok && i < c.per_au.size(); ++i) {
      const Expected& e = c.per_au[i];
      const eval::AuScore& s = r.per_au[i];
      ok = s.tp == e.tp && s.fp == e.fp && s.fn == e.fn && s.tn == e.tn &&
           s.precision == e.precision && s.recall == e.recall && s.f1 == e.f1;
      mean += e.f1;
    }
    ok = ok && r.average_f1 == mean / static_cast<double>(c.per_au.size());
    if (ok) {
      ++tables_ok;
    } else {
      note("table " + std::to_string(t + 1) + " mismatch");
    }
  }

  // Two frames sharing a label vector: variance trace = |a - b|^2 / 2.
  const std::vector<double> a{0.5, -1.25, 2.0, 0.0, 3.75, -0.125};
  const std::vector<double> b{-0.5, 0.75, 1.0, 0.25, -0.25, 0.375};
  double closed = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) closed += (a[i] - b[i]) * (a[i] - b[i]) / 2.0;
  const eval::AveVarReport av = eval::ave_var({a, b}, {{1, 0, 1}, {1, 0, 1}});
  const bool avevar_ok = av.ave_var == closed;

  // Checkpoint round trip after a short finetuning run.
  test::TempDir dir("acc8");
  train::PlantedFixtureConfig pc;
  pc.frames = 8;
  pc.subjects = 2;
  const train::PlantedFixture fx = train::write_planted_au(dir.str("planted"), pc);
  const train::AUManifest data = train::read_au_manifest(fx.manifest);
  const morph::CoefficientTable table =
      morph::index_by_frame(morph::read_coefficients(fx.coefficients));
  train::TrainConfig cfg = train::TrainConfig::defaults(train::Stage::finetune);
  cfg.epochs = 1;
  cfg.batch_size = 4;
  train::GleeModel model(cfg.model, 8);
  train::finetune(model, data, table, train::compute_stats(data), cfg);
  train::CheckpointMeta meta;
  meta.stage = train::Stage::finetune;
  meta.au_count = data.au_count;
  meta.seed = 8;
  meta.model = cfg.model;
  train::save_checkpoint(dir.str("ck"), model, meta);
  train::GleeModel restored = train::restore_model(train::load_checkpoint(dir.str("ck")));
  const std::vector<std::vector<double>> f_exp = train::lookup_coefficients(data, table);
  std::size_t frames_ok = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const train::FaceSample s = train::load_face_sample(
        {data.records[i].image_path, data.records[i].landmark_path}, cfg.model.canonical_size);
    const train::Inference x = model.infer(s, f_exp[i]);
    const train::Inference y = restored.infer(s, f_exp[i]);
    const bool same =
        std::memcmp(x.embedding.e_exp.data(), y.embedding.e_exp.data(), sizeof(float) * 16) == 0 &&
        std::memcmp(x.prediction.initial.data(), y.prediction.initial.data(),
                    sizeof(double) * x.prediction.initial.size()) == 0 &&
        std::memcmp(x.prediction.final.data(), y.prediction.final.data(),
                    sizeof(double) * x.prediction.final.size()) == 0;
    if (same) ++frames_ok;
  }

  Outcome o;
  o.pass = tables_ok == tables.size() && avevar_ok && frames_ok == data.records.size();
  o.summary = std::to_string(tables_ok) + "/" + std::to_string(tables.size()) +
              " crafted F1 tables exact; Ave-Var two-point case " + (avevar_ok ? "exact" : "differs") +
              " (" + fmt("%.17g", av.ave_var) + " vs " + fmt("%.17g", closed) +
              "); checkpoint round trip bitwise on " + std::to_string(frames_ok) + "/" +
              std::to_string(data.records.size()) + " frames";
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  failed += run_criterion(1, "crop geometry", 1.0, crop_geometry);
  failed += run_criterion(2, "3DMM round trip", 120.0, morph_round_trip);
  failed += run_criterion(3, "loss identities", 0.0, loss_identities);
  failed += run_criterion(4, "gradient checks", 30.0, gradient_checks);
  failed += run_criterion(5, "architecture invariants", 0.0, architecture);
  failed += run_criterion(6, "pretraining sanity", 300.0, pretraining);
  failed += run_criterion(7, "finetuning sanity", 300.0, finetuning);
  failed += run_criterion(8, "evaluation correctness", 0.0, evaluation);
  std::printf("%d/8 criteria passed\n", 8 - failed);
  return failed;
}
