#pragma once

#include <string>
#include <vector>

#include "glee/eval/metrics.hpp"
#include "glee/morph/coeffs.hpp"
#include "glee/train/manifest.hpp"
#include "glee/train/model.hpp"

namespace glee::eval {

struct FrameResult {
  std::string frame_id;
  train::Inference inference;
};

struct Evaluation {
  EvalReport report;
  std::vector<FrameResult> frames;
};

// Align, crop, embed, append the cached f_exp, classify and threshold every
// frame, then score against the manifest labels. Throws ValidationError
// naming the first frame without a coefficient entry, before any forward.
Evaluation evaluate(train::GleeModel& model, const train::AUManifest& data,
                    const morph::CoefficientTable& coefficients);

// Embeddings only (no classifier), one per frame.
std::vector<std::pair<std::string, embed::ExpressionEmbedding>> embed_frames(
    train::GleeModel& model, const train::AUManifest& data);

// frame_id, N_a final probabilities, N_a occurrences (0/1); tab-separated.
void write_predictions(const std::string& path, const std::vector<FrameResult>& frames);
// frame_id then 16 E_exp values; tab-separated.
void write_embeddings(const std::string& path,
                      const std::vector<std::pair<std::string, embed::ExpressionEmbedding>>& rows);

std::string report_text(const EvalReport& report);
// One record per AU then one summary record.
std::string report_jsonl(const EvalReport& report);
std::string report_text(const AveVarReport& report);
std::string report_jsonl(const AveVarReport& report);

}  // namespace glee::eval
