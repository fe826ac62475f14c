#include "glee/eval/evaluate.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"
#include "glee/train/training.hpp"
#include "json.hpp"

namespace glee::eval {

using nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string shortest(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Evaluation evaluate(train::GleeModel& model, const train::AUManifest& data,
                    const morph::CoefficientTable& coefficients) {
  data.validate();
  if (data.au_count != model.config().classifier.au_count) {
    throw ValidationError("evaluate: manifest has " + std::to_string(data.au_count) +
                          " AUs, checkpoint has " +
                          std::to_string(model.config().classifier.au_count));
  }
  const std::vector<std::vector<double>> f_exp = train::lookup_coefficients(data, coefficients);
  Evaluation ev;
  std::vector<std::vector<int>> preds, labels;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const train::AURecord& r = data.records[i];
    const train::FaceSample s =
        train::load_face_sample({r.image_path, r.landmark_path}, model.config().canonical_size);
    FrameResult fr{r.frame_id, model.infer(s, f_exp[i])};
    preds.emplace_back(fr.inference.prediction.occurrences.begin(),
                       fr.inference.prediction.occurrences.end());
    labels.push_back(r.labels);
    ev.frames.push_back(std::move(fr));
  }
  ev.report = f1_per_au(preds, labels);
  return ev;
}

std::vector<std::pair<std::string, embed::ExpressionEmbedding>> embed_frames(
    train::GleeModel& model, const train::AUManifest& data) {
  std::vector<std::pair<std::string, embed::ExpressionEmbedding>> out;
  for (const train::AURecord& r : data.records) {
    const train::FaceSample s =
        train::load_face_sample({r.image_path, r.landmark_path}, model.config().canonical_size);
    nn::Tape tape;
    const embed::EmbeddingVars v = model.embed(tape, s);
    embed::ExpressionEmbedding e;
    for (std::size_t d = 0; d < embed::kEmbedDim; ++d) {
      e.g_exp[d] = v.g_exp.value()[d];
      e.l_exp[d] = v.l_exp.value()[d];
      e.e_exp[d] = v.e_exp.value()[d];
    }
    out.emplace_back(r.frame_id, e);
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<FrameResult>& frames) {
  std::ostringstream os;
  for (const FrameResult& f : frames) {
    os << f.frame_id;
    for (double p : f.inference.prediction.final) os << '\t' << shortest(p);
    for (bool o : f.inference.prediction.occurrences) os << '\t' << (o ? 1 : 0);
    os << '\n';
  }
  io::write_text_atomic(path, os.str());
}

void write_embeddings(const std::string& path,
                      const std::vector<std::pair<std::string, embed::ExpressionEmbedding>>& rows) {
  std::ostringstream os;
  for (const auto& [id, e] : rows) {
    os << id;
    for (float v : e.e_exp) os << '\t' << shortest(v);
    os << '\n';
  }
  io::write_text_atomic(path, os.str());
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "frames " << r.frame_count;
  if (r.fold >= 0) os << "  fold " << r.fold;
  os << "\nau\tTP\tFP\tFN\tTN\tP\tR\tF1\n";
  for (std::size_t i = 0; i < r.per_au.size(); ++i) {
    const AuScore& s = r.per_au[i];
    os << i << '\t' << s.tp << '\t' << s.fp << '\t' << s.fn << '\t' << s.tn << '\t'
       << fixed(s.precision) << '\t' << fixed(s.recall) << '\t' << fixed(s.f1)
       << (s.vacuous ? "*" : "") << '\n';
  }
  os << "average F1 " << fixed(r.average_f1) << '\n';
  for (const std::string& f : r.flags) os << "note: " << f << '\n';
  return os.str();
}

std::string report_jsonl(const EvalReport& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.per_au.size(); ++i) {
    const AuScore& s = r.per_au[i];
    os << json{{"type", "au"},       {"au", i},           {"tp", s.tp},
               {"fp", s.fp},         {"fn", s.fn},        {"tn", s.tn},
               {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
               {"vacuous", s.vacuous}}
              .dump()
       << '\n';
  }
  os << json{{"type", "summary"}, {"average_f1", r.average_f1}, {"frames", r.frame_count},
             {"fold", r.fold},    {"flags", r.flags}}
            .dump()
     << '\n';
  return os.str();
}

std::string report_text(const AveVarReport& r) {
  std::ostringstream os;
  os << "group\tcount\tvariance\n";
  for (const AveVarGroup& g : r.groups) {
    os << g.key << '\t' << g.count << '\t' << fixed(g.scalar, 6) << (g.singleton ? "*" : "")
       << '\n';
  }
  os << "ave_var " << fixed(r.ave_var, 6) << '\n';
  return os.str();
}

std::string report_jsonl(const AveVarReport& r) {
  std::ostringstream os;
  for (const AveVarGroup& g : r.groups) {
    os << json{{"type", "group"},  {"labels", g.key},         {"count", g.count},
               {"variance", g.scalar}, {"per_dim", g.variance}, {"singleton", g.singleton}}
              .dump()
       << '\n';
  }
  os << json{{"type", "summary"}, {"ave_var", r.ave_var}, {"groups", r.groups.size()}}.dump()
     << '\n';
  return os.str();
}

}  // namespace glee::eval
