#pragma once

#include "musep/manifest.hpp"
#include "musep/seqdata.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace musep {

struct Provenance {
  std::string combo;       // feature combination, e.g. "audio+video"
  std::uint64_t seed = 0;
  std::string checkpoint;  // checkpoint path or id

  bool operator==(const Provenance&) const = default;
};

struct PredictionSequence {
  std::string subject_id;
  Dimension dimension = Dimension::Arousal;
  std::vector<TimestampMs> timestamps;
  std::vector<double> values;
  std::vector<Provenance> provenance;

  /// Sort key for deterministic reductions.
  std::string member_name() const;
};

void write_prediction_csv(const std::filesystem::path& path, const PredictionSequence& pred);
PredictionSequence load_prediction_csv(const std::filesystem::path& path, std::string subject_id,
                                       Dimension dimension);

/// Prediction files live at <dir>/<dimension>/<subject>.csv.
std::filesystem::path prediction_path(const std::filesystem::path& dir, Dimension d, const std::string& subject);

/// Element-wise mean, summed in sorted member-name order so the result does
/// not depend on the order members are passed in.
PredictionSequence ensemble_mean(const std::vector<PredictionSequence>& members);

struct SubjectScore {
  std::string subject_id;
  Dimension dimension = Dimension::Arousal;
  double ccc = 0.0;
};

struct EvaluationReport {
  std::vector<SubjectScore> rows;
  std::map<Dimension, double> dimension_means;
  /// Mean of the dimension means; only set when both dimensions were scored.
  std::optional<double> combined;
};

struct EvalOptions {
  std::vector<Dimension> dimensions = {Dimension::Arousal, Dimension::Valence};
  /// Score only the personal_test segment (steps after the first 120 s).
  bool personal_test_only = false;
};

/// Video-level CCC per subject and dimension, per-dimension means and the
/// combined score.
EvaluationReport evaluate_corpus(const std::vector<PredictionSequence>& preds, const Corpus& labels,
                                 const EvalOptions& options = {});

/// Aggregates already computed per-subject scores.
EvaluationReport summarize_scores(std::vector<SubjectScore> rows);

/// `subject,dimension,ccc` rows followed by `mean,<dim>,<v>` and `combined,all,<v>` summary rows.
void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace musep
