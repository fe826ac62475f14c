#include "glee/eval/metrics.hpp"

#include <map>

#include "glee/common/error.hpp"

namespace glee::eval {

EvalReport f1_per_au(const std::vector<std::vector<int>>& predictions,
                     const std::vector<std::vector<int>>& labels) {
  if (labels.empty()) throw ValidationError("f1: no frames");
  if (predictions.size() != labels.size()) {
    throw ValidationError("f1: " + std::to_string(predictions.size()) + " prediction rows for " +
                          std::to_string(labels.size()) + " label rows");
  }
  const std::size_t n_au = labels.front().size();
  if (n_au == 0) throw ValidationError("f1: zero AUs");
  EvalReport r;
  r.frame_count = labels.size();
  r.per_au.assign(n_au, {});
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f].size() != n_au || predictions[f].size() != n_au) {
      throw ValidationError("f1: frame " + std::to_string(f) + " has inconsistent AU count");
    }
    for (std::size_t i = 0; i < n_au; ++i) {
      const int g = labels[f][i], p = predictions[f][i];
      if ((g != 0 && g != 1) || (p != 0 && p != 1)) throw ValidationError("f1: values must be 0/1");
      AuScore& s = r.per_au[i];
      if (p == 1 && g == 1) ++s.tp;
      else if (p == 1) ++s.fp;
      else if (g == 1) ++s.fn;
      else ++s.tn;
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n_au; ++i) {
    AuScore& s = r.per_au[i];
    const double tp = static_cast<double>(s.tp);
    s.precision = s.tp + s.fp > 0 ? tp / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn > 0 ? tp / static_cast<double>(s.tp + s.fn) : 0.0;
    if (s.tp + s.fp + s.fn == 0) {
      s.f1 = 1.0;
      s.vacuous = true;
      r.flags.push_back("au" + std::to_string(i) + ": vacuous F1 (no positives predicted or labelled)");
    } else {
      // 2PR/(P+R) in one rounding.
      s.f1 = 2.0 * tp / static_cast<double>(2 * s.tp + s.fp + s.fn);
    }
    sum += s.f1;
  }
  r.average_f1 = sum / static_cast<double>(n_au);
  return r;
}

AveVarReport ave_var(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<std::vector<int>>& labels) {
  if (embeddings.empty()) throw ValidationError("ave_var: no embeddings");
  if (embeddings.size() != labels.size()) {
    throw ValidationError("ave_var: " + std::to_string(embeddings.size()) + " embeddings for " +
                          std::to_string(labels.size()) + " label rows");
  }
  const std::size_t dim = embeddings.front().size();
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (embeddings[f].size() != dim) throw ValidationError("ave_var: ragged embeddings");
    std::string key;
    for (int g : labels[f]) key += g == 1 ? '1' : '0';
    groups[key].push_back(f);
  }
  AveVarReport r;
  double total = 0.0;
  for (const auto& [key, members] : groups) {
    AveVarGroup g;
    g.key = key;
    g.count = members.size();
    g.variance.assign(dim, 0.0);
    g.singleton = members.size() < 2;
    if (!g.singleton) {
      const double n = static_cast<double>(members.size());
      for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (std::size_t m : members) mean += embeddings[m][d];
        mean /= n;
        double ss = 0.0;
        for (std::size_t m : members) {
          const double dev = embeddings[m][d] - mean;
          ss += dev * dev;
        }
        g.variance[d] = ss / (n - 1.0);
        g.scalar += g.variance[d];
      }
    }
    total += g.scalar;
    r.groups.push_back(std::move(g));
  }
  r.ave_var = total / static_cast<double>(r.groups.size());
  return r;
}

}  // namespace glee::eval
