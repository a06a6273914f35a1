#pragma once

#include "musep/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace musep {

/// One modality's per-step feature matrix on the 2 Hz grid.
struct FeatureSequence {
  std::string subject_id;
  std::string modality;
  std::vector<TimestampMs> timestamps;
  Matrix values;  // steps x dims

  std::size_t steps() const { return timestamps.size(); }
  std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
};

struct LabelSequence {
  std::string subject_id;
  Dimension dimension = Dimension::Arousal;
  std::vector<TimestampMs> timestamps;
  std::vector<double> values;

  std::size_t steps() const { return timestamps.size(); }
};

/// A subject's modalities and labels re-indexed to one shared grid.
/// Modality order is the concatenation order fed to the model.
struct AlignedSample {
  std::string subject_id;
  std::vector<FeatureSequence> modalities;
  std::map<Dimension, LabelSequence> labels;
  Role role = Role::Train;

  const std::vector<TimestampMs>& timestamps() const;
  std::size_t steps() const { return timestamps().size(); }
  std::size_t total_width() const;
  std::vector<std::string> modality_names() const;
  const LabelSequence& label(Dimension d) const;
  /// Features concatenated across modalities in recorded order: steps x total_width.
  Matrix concat_features() const;
};

struct ModalityStats {
  std::string name;
  Vector mean;
  Vector std;
};

struct NormStats {
  std::vector<ModalityStats> modalities;
};

inline constexpr double kStdFloor = 1e-6;

/// Half-open range of label steps.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

struct SubjectSplit {
  std::string subject_id;
  StepRange personal_train;
  StepRange personal_dev;
  StepRange personal_test;
};

/// 60 s at 2 Hz.
inline constexpr std::size_t kPersonalSegmentSteps = 120;

// Invariant checks; each throws the matching ErrorCode.
void validate(const FeatureSequence& seq);
void validate(const LabelSequence& seq);

FeatureSequence load_feature_csv(const std::filesystem::path& path,
                                 std::optional<std::size_t> expected_dim = std::nullopt,
                                 std::string subject_id = {}, std::string modality = {});
void write_feature_csv(const std::filesystem::path& path, const FeatureSequence& seq);

LabelSequence load_label_csv(const std::filesystem::path& path, Dimension dimension,
                             std::string subject_id = {});
void write_label_csv(const std::filesystem::path& path, const LabelSequence& seq);

/// Crops every input to the intersection of their timestamp grids.
AlignedSample align_and_label(const std::vector<FeatureSequence>& features,
                              const std::vector<LabelSequence>& labels, Role role = Role::Train);

NormStats fit_norm_stats(std::span<const AlignedSample> train_samples);
AlignedSample apply_norm(const AlignedSample& sample, const NormStats& stats);

SubjectSplit make_subject_split(const AlignedSample& sample,
                                std::size_t segment_steps = kPersonalSegmentSteps);

/// Contiguous sub-sequence of every member; labels included.
AlignedSample slice(const AlignedSample& sample, StepRange range);

/// Keeps only the named modalities, in the given order.
AlignedSample select_modalities(const AlignedSample& sample, std::span<const std::string> names);

// Shared text helpers used by the other CSV-producing modules.
std::string format_double(double v);
std::optional<double> try_parse_double(std::string_view text);
std::optional<std::int64_t> try_parse_int(std::string_view text);
std::vector<std::string_view> split_view(std::string_view line, char delim);
std::string_view trim(std::string_view s);

}  // namespace musep
