#include "glee/au/loss.hpp"

#include <algorithm>
#include <cmath>

#include "glee/common/error.hpp"
#include "glee/nn/ops.hpp"

namespace glee::au {

namespace {

void check(std::size_t n, std::span<const int> labels, const DatasetStats& stats) {
  if (n == 0) throw ValidationError("weighted CE: empty prediction");
  if (labels.size() != n || stats.r.size() != n) {
    throw ValidationError("weighted CE: " + std::to_string(n) + " predictions, " +
                          std::to_string(labels.size()) + " labels, " +
                          std::to_string(stats.r.size()) + " ratios");
  }
  for (int g : labels) {
    if (g != 0 && g != 1) throw ValidationError("weighted CE: labels must be 0 or 1");
  }
}

double term(double p, int g, double r) {
  const double pc = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
  return (g == 1 ? std::log(pc) : std::log(1.0 - pc)) / r;
}

}  // namespace

void DatasetStats::validate() const {
  if (!(epsilon_clamp > 0.0)) throw ValidationError("stats: epsilon_clamp must be positive");
  for (double v : r) {
    if (!(v >= epsilon_clamp && v <= 1.0)) {
      throw ValidationError("stats: occurrence ratio " + std::to_string(v) + " outside [" +
                            std::to_string(epsilon_clamp) + ", 1]");
    }
  }
}

double weighted_ce(std::span<const double> probs, std::span<const int> labels,
                   const DatasetStats& stats) {
  check(probs.size(), labels, stats);
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) s += term(probs[i], labels[i], stats.r[i]);
  return -s / static_cast<double>(probs.size());
}

double weighted_ce_logits(std::span<const double> logits, std::span<const int> labels,
                          const DatasetStats& stats, std::vector<double>* grad) {
  check(logits.size(), labels, stats);
  const double n = static_cast<double>(logits.size());
  if (grad != nullptr) grad->assign(logits.size(), 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    s += term(p, labels[i], stats.r[i]);
    if (grad != nullptr && p > kProbabilityClip && p < 1.0 - kProbabilityClip) {
      (*grad)[i] = (p - labels[i]) / (n * stats.r[i]);
    }
  }
  return -s / n;
}

nn::Var weighted_ce(nn::Var logits, std::span<const int> labels, const DatasetStats& stats) {
  const auto vals = logits.value().values();
  const std::vector<double> z(vals.begin(), vals.end());
  std::vector<double> g;
  const double loss = weighted_ce_logits(z, labels, stats, &g);
  if (!std::isfinite(loss)) throw NumericalError("weighted CE: non-finite loss");
  const int id = logits.id();
  return logits.tape().record(nn::Tensor({1}, static_cast<float>(loss)), {logits},
                              [id, g = std::move(g)](nn::Tape& t, int self) {
                                const float seed = t.grad(self)[0];
                                if (nn::Tensor* sink = t.grad_sink(id)) {
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                    (*sink)[i] += seed * static_cast<float>(g[i]);
                                  }
                                }
                              });
}

double total_loss(const AUPrediction& pred, std::span<const int> labels,
                  const DatasetStats& stats) {
  return weighted_ce(pred.initial, labels, stats) + weighted_ce(pred.final, labels, stats);
}

nn::Var total_loss(const ClassifierVars& vars, std::span<const int> labels,
                   const DatasetStats& stats) {
  return nn::add(weighted_ce(vars.initial_logits, labels, stats),
                 weighted_ce(vars.final_logits, labels, stats));
}

}  // namespace glee::au
