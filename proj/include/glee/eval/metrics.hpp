#pragma once

#include <string>
#include <vector>

namespace glee::eval {

struct AuScore {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // TP + FP + FN = 0: F1 is set to 1.
  bool vacuous = false;
};

struct EvalReport {
  std::vector<AuScore> per_au;
  double average_f1 = 0.0;
  std::size_t frame_count = 0;
  int fold = -1;
  std::vector<std::string> flags;
};

// predictions / labels: N x N_a of 0/1. P = TP/(TP+FP) and R = TP/(TP+FN)
// (0 on an empty denominator), F1 = 2PR/(P+R) evaluated as
// 2TP/(2TP+FP+FN), 0 when TP = 0.
EvalReport f1_per_au(const std::vector<std::vector<int>>& predictions,
                     const std::vector<std::vector<int>>& labels);

struct AveVarGroup {
  std::string key;  // label vector as 0/1 characters
  std::size_t count = 0;
  std::vector<double> variance;  // unbiased, per dimension
  double scalar = 0.0;           // trace
  bool singleton = false;
};

struct AveVarReport {
  std::vector<AveVarGroup> groups;  // ordered by key
  double ave_var = 0.0;
};

// Frames grouped by exact label vector; each group's variance is the trace
// of its unbiased sample covariance (0 for singletons); ave_var is the mean
// over groups.
AveVarReport ave_var(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<std::vector<int>>& labels);

}  // namespace glee::eval
