// glee: command-line front end. Exit status 0 ok, 1 usage, 2 data or
// validation error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"
#include "glee/eval/evaluate.hpp"
#include "glee/geometry/crops.hpp"
#include "glee/morph/synthetic.hpp"
#include "glee/train/checkpoint.hpp"
#include "glee/train/fixtures.hpp"
#include "glee/train/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glee;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

void write_report(const std::string& base, const std::string& text, const std::string& jsonl) {
  io::write_text_atomic(base + ".txt", text);
  io::write_text_atomic(base + ".jsonl", jsonl);
  std::cout << text;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

train::TrainConfig config_for(const Common& c, train::Stage stage) {
  train::TrainConfig cfg =
      c.config.empty() ? train::TrainConfig::defaults(stage) : train::load_config(c.config, stage);
  if (cfg.stage != stage) {
    throw ConfigError("config stage is " + train::to_string(cfg.stage) + ", command needs " +
                      train::to_string(stage));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

morph::MorphableModel morph_model(const std::string& source) {
  if (source == "synthetic") return morph::make_synthetic_model();
  return morph::load_model(source);
}

std::string default_coefficients(const std::string& manifest) {
  return (fs::path(manifest).parent_path() / "coefficients.tsv").string();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---- align ----------------------------------------------------------------

struct AlignArgs {
  Common c;
  std::string image, landmarks;
  std::size_t size = 176;
};

int run_align(const AlignArgs& a) {
  const geometry::Image frame = geometry::read_netpbm(a.image);
  const geometry::LandmarkSet68 lm = geometry::read_landmarks(a.landmarks, frame.size());
  const geometry::AlignedFace face =
      geometry::align_face(frame, lm, geometry::AlignmentConfig::with_size(a.size));
  const geometry::CropSet crops = geometry::crop_parts(face);
  fs::create_directories(fs::path(a.c.out) / "crops");
  geometry::write_netpbm((fs::path(a.c.out) / "aligned.ppm").string(), face.pixels);
  for (geometry::CropName n : geometry::kAllCrops) {
    geometry::write_netpbm(
        (fs::path(a.c.out) / "crops" / (std::string(geometry::to_string(n)) + ".ppm")).string(),
        crops.get(n));
  }
  const geometry::Similarity& t = face.transform;
  std::ostringstream text;
  text << "aligned " << a.image << " to " << a.size << "x" << a.size << "\nscale " << fmt(t.scale())
       << "  rotation " << fmt(t.rotation()) << " rad  translation (" << fmt(t.tx) << ", "
       << fmt(t.ty) << ")\n";
  const json rec{{"type", "alignment"}, {"image", a.image},   {"size", a.size},
                 {"matrix", t.matrix()}, {"scale", t.scale()}, {"rotation", t.rotation()}};
  write_report((fs::path(a.c.out) / "report").string(), text.str(), rec.dump() + "\n");
  return 0;
}

// ---- fit3d ----------------------------------------------------------------

struct Fit3dArgs {
  Common c;
  std::string model, landmarks, manifest;
  std::size_t image_size = 256;
};

int run_fit3d(const Fit3dArgs& a) {
  const morph::MorphableModel model = morph_model(a.model);
  const morph::FitConfig fit_cfg;
  std::vector<morph::CoefficientRow> rows;
  if (!a.manifest.empty()) {
    rows = train::precompute_coefficients(train::read_au_manifest(a.manifest), model, fit_cfg);
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.landmarks)) {
      if (e.is_regular_file() && e.path().extension() == ".pts") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no .pts landmark files in " + a.landmarks);
    for (const fs::path& p : files) {
      const std::string id = p.stem().string();
      try {
        const geometry::LandmarkSet68 lm =
            geometry::read_landmarks(p.string(), {a.image_size, a.image_size});
        rows.push_back(morph::make_row(id, morph::fit_coefficients(model, lm, fit_cfg)));
      } catch (const Error& e) {
        rows.push_back(morph::failed_row(id, model.shape_count(), model.expr_count(), e.what()));
      }
    }
  }
  ensure_parent(a.c.out);
  morph::write_coefficients(a.c.out, rows);

  std::size_t converged = 0, failed = 0;
  std::ostringstream jsonl;
  for (const morph::CoefficientRow& r : rows) {
    converged += r.converged ? 1 : 0;
    failed += r.status == "ok" ? 0 : 1;
    jsonl << json{{"type", "frame"},          {"frame_id", r.frame_id},
                  {"final_cost", r.final_cost}, {"converged", r.converged},
                  {"status", r.status}}
                 .dump()
          << '\n';
  }
  const double frac = static_cast<double>(converged) / static_cast<double>(rows.size());
  jsonl << json{{"type", "summary"}, {"frames", rows.size()}, {"converged", converged},
                {"converged_fraction", frac}, {"failed", failed}}
               .dump()
        << '\n';
  std::ostringstream text;
  text << "fitted " << rows.size() << " frames: " << converged << " converged ("
       << fmt(100.0 * frac, 1) << "%), " << failed << " failed\n";
  for (const morph::CoefficientRow& r : rows) {
    if (r.status != "ok") text << "  " << r.frame_id << ": " << r.status << '\n';
  }
  write_report(a.c.out + ".report", text.str(), jsonl.str());
  return 0;
}

// ---- pretrain -------------------------------------------------------------

struct PretrainArgs {
  Common c;
  std::string triplets, heldout;
  std::optional<std::size_t> epochs;
};

int run_pretrain(const PretrainArgs& a) {
  train::TrainConfig cfg = config_for(a.c, train::Stage::pretrain);
  if (a.epochs) cfg.epochs = *a.epochs;
  const train::TripletManifest triplets = train::read_triplet_manifest(a.triplets);
  train::GleeModel model(cfg.model, cfg.seed);
  std::ostringstream jsonl;
  const train::TrainResult res = train::pretrain(model, triplets, cfg, [&](const train::EpochLog& l) {
    std::cerr << "epoch " << l.epoch << " mean triplet loss " << fmt(l.mean_loss) << '\n';
    jsonl << json{{"type", "epoch"}, {"epoch", l.epoch}, {"mean_loss", l.mean_loss}}.dump() << '\n';
  });
  train::CheckpointMeta meta;
  meta.stage = train::Stage::pretrain;
  meta.au_count = cfg.model.classifier.au_count;
  meta.config_hash = train::config_hash(cfg);
  meta.seed = cfg.seed;
  meta.model = cfg.model;
  meta.loss_history = res.loss_history;
  train::save_checkpoint(a.c.out, model, meta);

  std::ostringstream text;
  text << "pretrained " << res.loss_history.size() << " epochs on " << triplets.records.size()
       << " triplets\n";
  for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
    text << "epoch " << e << "\t" << fmt(res.loss_history[e]) << '\n';
  }
  json summary{{"type", "summary"}, {"epochs", res.loss_history.size()},
               {"triplets", triplets.records.size()}, {"checkpoint", a.c.out}};
  if (!a.heldout.empty()) {
    const double acc = train::ranking_accuracy(model, train::read_triplet_manifest(a.heldout));
    text << "held-out ranking accuracy " << fmt(acc, 4) << '\n';
    summary["heldout_ranking_accuracy"] = acc;
  }
  jsonl << summary.dump() << '\n';
  write_report((fs::path(a.c.out) / "train_report").string(), text.str(), jsonl.str());
  return 0;
}

// ---- finetune -------------------------------------------------------------

struct FinetuneArgs {
  Common c;
  std::string manifest, coeffs, init;
  bool fresh_start = false;
  bool fixed_branches = false;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> early_stop_f1;
};

int run_finetune(const FinetuneArgs& a) {
  train::TrainConfig cfg = config_for(a.c, train::Stage::finetune);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.early_stop_f1) cfg.early_stop_f1 = *a.early_stop_f1;
  cfg.fresh_start = cfg.fresh_start || a.fresh_start;
  cfg.fixed_branches = cfg.fixed_branches || a.fixed_branches;
  cfg.validate();
  if (a.init.empty() && !cfg.fresh_start) {
    throw CLI::ValidationError("finetune", "needs --init CKPT or --fresh-start");
  }
  const train::AUManifest data = train::read_au_manifest(a.manifest);
  const std::string coeff_path = a.coeffs.empty() ? default_coefficients(a.manifest) : a.coeffs;
  const morph::CoefficientTable table = morph::index_by_frame(morph::read_coefficients(coeff_path));

  std::optional<train::GleeModel> model;
  if (!a.init.empty()) {
    model.emplace(train::finetune_init(train::load_checkpoint(a.init), cfg, data.au_count));
  } else {
    if (cfg.model.classifier.au_count != data.au_count) {
      throw ValidationError("N_a mismatch: config has " +
                            std::to_string(cfg.model.classifier.au_count) +
                            " AUs, manifest has " + std::to_string(data.au_count));
    }
    model.emplace(cfg.model, cfg.seed);
  }
  const au::DatasetStats stats = train::compute_stats(data);
  std::ostringstream jsonl;
  const train::TrainResult res =
      train::finetune(*model, data, table, stats, cfg, [&](const train::EpochLog& l) {
        std::cerr << "epoch " << l.epoch << " mean loss " << fmt(l.mean_loss);
        json rec{{"type", "epoch"}, {"epoch", l.epoch}, {"mean_loss", l.mean_loss}};
        if (l.train_f1 >= 0.0) {
          std::cerr << " train F1 " << fmt(l.train_f1, 4);
          rec["train_f1"] = l.train_f1;
        }
        std::cerr << '\n';
        jsonl << rec.dump() << '\n';
      });
  train::CheckpointMeta meta;
  meta.stage = train::Stage::finetune;
  meta.au_count = data.au_count;
  meta.config_hash = train::config_hash(cfg);
  meta.seed = model->seed();
  meta.model = model->config();
  meta.loss_history = res.loss_history;
  train::save_checkpoint(a.c.out, *model, meta);

  std::ostringstream text;
  text << "finetuned " << res.loss_history.size() << " epochs on " << data.records.size()
       << " frames" << (cfg.fresh_start ? " (fresh start)" : "")
       << (cfg.fixed_branches ? " (fixed branches)" : "") << '\n';
  for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
    text << "epoch " << e << "\t" << fmt(res.loss_history[e]);
    if (e < res.train_f1_history.size()) text << "\tF1 " << fmt(res.train_f1_history[e], 4);
    text << '\n';
  }
  jsonl << json{{"type", "summary"},          {"epochs", res.loss_history.size()},
                {"frames", data.records.size()}, {"fresh_start", cfg.fresh_start},
                {"fixed_branches", cfg.fixed_branches}, {"stopped_early", res.stopped_early},
                {"checkpoint", a.c.out}}
               .dump()
        << '\n';
  write_report((fs::path(a.c.out) / "train_report").string(), text.str(), jsonl.str());
  return 0;
}

// ---- eval / embed ---------------------------------------------------------

struct EvalArgs {
  Common c;
  std::string ckpt, manifest, coeffs;
};

int run_eval(const EvalArgs& a) {
  train::GleeModel model = train::restore_model(train::load_checkpoint(a.ckpt));
  const train::AUManifest data = train::read_au_manifest(a.manifest);
  const std::string coeff_path = a.coeffs.empty() ? default_coefficients(a.manifest) : a.coeffs;
  const morph::CoefficientTable table = morph::index_by_frame(morph::read_coefficients(coeff_path));
  const eval::Evaluation ev = eval::evaluate(model, data, table);
  fs::create_directories(a.c.out);
  eval::write_predictions((fs::path(a.c.out) / "predictions.tsv").string(), ev.frames);
  write_report((fs::path(a.c.out) / "report").string(), eval::report_text(ev.report),
               eval::report_jsonl(ev.report));
  return 0;
}

struct EmbedArgs {
  Common c;
  std::string ckpt, manifest;
};

int run_embed(const EmbedArgs& a) {
  train::GleeModel model = train::restore_model(train::load_checkpoint(a.ckpt));
  const train::AUManifest data = train::read_au_manifest(a.manifest);
  const auto rows = eval::embed_frames(model, data);
  ensure_parent(a.c.out);
  eval::write_embeddings(a.c.out, rows);
  std::vector<std::vector<double>> e;
  std::vector<std::vector<int>> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    e.emplace_back(rows[i].second.e_exp.begin(), rows[i].second.e_exp.end());
    labels.push_back(data.records[i].labels);
  }
  const eval::AveVarReport av = eval::ave_var(e, labels);
  write_report(a.c.out + ".report", eval::report_text(av), eval::report_jsonl(av));
  return 0;
}

// ---- stats / folds --------------------------------------------------------

struct StatsArgs {
  Common c;
  std::string manifest;
};

int run_stats(const StatsArgs& a) {
  const train::AUManifest data = train::read_au_manifest(a.manifest, false);
  const au::DatasetStats s = train::compute_stats(data);
  std::ostringstream tsv, text, jsonl;
  tsv << "au\tcount\tr\n";
  text << "occurrence ratios over " << data.records.size() << " frames\n";
  for (std::size_t i = 0; i < s.r.size(); ++i) {
    std::size_t count = 0;
    for (const train::AURecord& r : data.records) count += r.labels[i];
    tsv << i << '\t' << count << '\t' << s.r[i] << '\n';
    text << "au " << i << "\tcount " << count << "\tr " << fmt(s.r[i], 4)
         << (s.r[i] == au::kRatioClamp && count == 0 ? " (clamped)" : "") << '\n';
    jsonl << json{{"type", "au"}, {"au", i}, {"count", count}, {"r", s.r[i]}}.dump() << '\n';
  }
  jsonl << json{{"type", "summary"}, {"frames", data.records.size()}, {"n_au", data.au_count}}.dump()
        << '\n';
  ensure_parent(a.c.out);
  io::write_text_atomic(a.c.out, tsv.str());
  write_report(a.c.out + ".report", text.str(), jsonl.str());
  return 0;
}

struct FoldsArgs {
  Common c;
  std::string manifest;
  std::size_t k = 3;
};

int run_folds(const FoldsArgs& a) {
  const train::AUManifest data = train::read_au_manifest(a.manifest, false);
  const std::vector<train::Fold> folds = train::make_folds(data, a.k, a.c.seed.value_or(0));
  fs::create_directories(a.c.out);
  std::ostringstream text, jsonl;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::string stem = (fs::path(a.c.out) / ("fold" + std::to_string(f))).string();
    train::write_au_manifest(stem + "_train.tsv", folds[f].train);
    train::write_au_manifest(stem + "_test.tsv", folds[f].test);
    text << "fold " << f << ": test subjects";
    for (const std::string& s : folds[f].test_subjects) text << ' ' << s;
    text << " (" << folds[f].test.records.size() << " test / " << folds[f].train.records.size()
         << " train frames)\n";
    jsonl << json{{"type", "fold"},
                  {"fold", f},
                  {"test_subjects", folds[f].test_subjects},
                  {"test_frames", folds[f].test.records.size()},
                  {"train_frames", folds[f].train.records.size()}}
                 .dump()
          << '\n';
  }
  jsonl << json{{"type", "summary"}, {"k", a.k}, {"seed", a.c.seed.value_or(0)}}.dump() << '\n';
  write_report((fs::path(a.c.out) / "report").string(), text.str(), jsonl.str());
  return 0;
}

// ---- make-fixture ---------------------------------------------------------

struct FixtureArgs {
  Common c;
  std::string kind;
  std::size_t count = 50;
};

int run_fixture(const FixtureArgs& a) {
  const std::uint64_t seed = a.c.seed.value_or(1);
  std::ostringstream text;
  json rec{{"type", "fixture"}, {"kind", a.kind}, {"seed", seed}};
  if (a.kind == "triplets") {
    train::ClusterFixtureConfig cfg;
    cfg.seed = seed;
    const train::ClusterFixture fx = train::write_cluster_triplets(a.c.out, cfg);
    text << "triplets " << fx.train_manifest << "\nheld-out " << fx.heldout_manifest << '\n';
    rec["triplets"] = fx.train_manifest;
    rec["heldout"] = fx.heldout_manifest;
  } else if (a.kind == "au") {
    train::PlantedFixtureConfig cfg;
    cfg.seed = seed;
    const train::PlantedFixture fx = train::write_planted_au(a.c.out, cfg);
    text << "manifest " << fx.manifest << "\nmodel " << fx.model << "\ntruth " << fx.coefficients
         << '\n';
    rec["manifest"] = fx.manifest;
    rec["model"] = fx.model;
    rec["truth"] = fx.coefficients;
  } else {
    const train::SceneFixture fx = train::write_scene_fixture(a.c.out, a.count, seed);
    text << "model " << fx.model << "\nlandmarks " << fx.landmark_dir << "\ntruth " << fx.truth
         << '\n';
    rec["model"] = fx.model;
    rec["landmarks"] = fx.landmark_dir;
    rec["truth"] = fx.truth;
  }
  write_report((fs::path(a.c.out) / "fixture").string(), text.str(), rec.dump() + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facial action unit detection toolkit"};
  app.require_subcommand(1);

  AlignArgs align;
  auto* c_align = app.add_subcommand("align", "align a frame and extract the 16 crops");
  add_common(c_align, align.c);
  c_align->add_option("--image", align.image, "netpbm frame")->required()->check(CLI::ExistingFile);
  c_align->add_option("--landmarks", align.landmarks, "68-point landmark file")
      ->required()
      ->check(CLI::ExistingFile);
  c_align->add_option("--size", align.size, "canonical size")->check(CLI::Range(16, 4096));

  Fit3dArgs fit;
  auto* c_fit = app.add_subcommand("fit3d", "fit morphable-model coefficients to landmarks");
  add_common(c_fit, fit.c);
  c_fit->add_option("--model", fit.model, "morphable model file, or 'synthetic'")->required();
  auto* fit_lm = c_fit->add_option("--landmarks", fit.landmarks, "directory of .pts files")
                     ->check(CLI::ExistingDirectory);
  auto* fit_man = c_fit->add_option("--manifest", fit.manifest, "AU manifest")->check(CLI::ExistingFile);
  fit_lm->excludes(fit_man);
  c_fit->add_option("--image-size", fit.image_size, "frame size for --landmarks files");

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "triplet pretraining of the embedding network");
  add_common(c_pre, pre.c);
  c_pre->add_option("--triplets", pre.triplets, "triplet manifest")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--heldout", pre.heldout, "held-out triplets for ranking accuracy")
      ->check(CLI::ExistingFile);
  c_pre->add_option("--epochs", pre.epochs, "override the epoch count");

  FinetuneArgs fine;
  auto* c_fine = app.add_subcommand("finetune", "end-to-end AU training");
  add_common(c_fine, fine.c);
  c_fine->add_option("--manifest", fine.manifest, "AU manifest")->required()->check(CLI::ExistingFile);
  c_fine->add_option("--coeffs", fine.coeffs, "coefficient table (default: coefficients.tsv next to the manifest)");
  c_fine->add_option("--init", fine.init, "pretrain or finetune checkpoint");
  c_fine->add_flag("--fresh-start", fine.fresh_start, "re-initialize the embedding network");
  c_fine->add_flag("--fixed-branches", fine.fixed_branches, "keep the embedding network fixed");
  c_fine->add_option("--epochs", fine.epochs, "override the epoch count");
  c_fine->add_option("--batch-size", fine.batch_size, "override the batch size");
  c_fine->add_option("--early-stop-f1", fine.early_stop_f1, "stop once training F1 reaches this");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on an AU manifest");
  add_common(c_eval, ev.c);
  c_eval->add_option("--ckpt", ev.ckpt, "checkpoint directory")->required();
  c_eval->add_option("--manifest", ev.manifest, "AU manifest")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--coeffs", ev.coeffs, "coefficient table (default: coefficients.tsv next to the manifest)");

  EmbedArgs emb;
  auto* c_emb = app.add_subcommand("embed", "export E_exp per frame and the Ave-Var report");
  add_common(c_emb, emb.c);
  c_emb->add_option("--ckpt", emb.ckpt, "checkpoint directory")->required();
  c_emb->add_option("--manifest", emb.manifest, "AU manifest")->required()->check(CLI::ExistingFile);

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "AU occurrence ratios");
  add_common(c_st, st.c);
  c_st->add_option("--manifest", st.manifest, "AU manifest")->required()->check(CLI::ExistingFile);

  FoldsArgs fo;
  auto* c_fo = app.add_subcommand("folds", "subject-exclusive k-fold split");
  add_common(c_fo, fo.c);
  c_fo->add_option("--manifest", fo.manifest, "AU manifest")->required()->check(CLI::ExistingFile);
  c_fo->add_option("--k", fo.k, "fold count")->check(CLI::PositiveNumber);

  FixtureArgs fx;
  auto* c_fx = app.add_subcommand("make-fixture", "write a synthetic dataset");
  add_common(c_fx, fx.c);
  c_fx->add_option("--kind", fx.kind, "triplets, au or scenes")
      ->required()
      ->check(CLI::IsMember({"triplets", "au", "scenes"}));
  c_fx->add_option("--count", fx.count, "scene count (kind scenes)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (c_fit->parsed() && fit.landmarks.empty() && fit.manifest.empty()) {
      throw CLI::RequiredError("--landmarks or --manifest");
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (c_align->parsed()) return run_align(align);
    if (c_fit->parsed()) return run_fit3d(fit);
    if (c_pre->parsed()) return run_pretrain(pre);
    if (c_fine->parsed()) return run_finetune(fine);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_emb->parsed()) return run_embed(emb);
    if (c_st->parsed()) return run_stats(st);
    if (c_fo->parsed()) return run_folds(fo);
    if (c_fx->parsed()) return run_fixture(fx);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
