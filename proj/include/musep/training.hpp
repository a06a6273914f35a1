#pragma once

#include "musep/checkpoint.hpp"
#include "musep/ensemble.hpp"
#include "musep/manifest.hpp"
#include "musep/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace musep {

struct WindowingConfig {
  std::size_t win_steps = 200;
  std::size_t hop_steps = 100;

  bool operator==(const WindowingConfig&) const = default;
};

void validate(const WindowingConfig& cfg);

/// Starts 0, hop, 2 hop, ... while start < T, each clipped to T; ranges
/// shorter than 2 steps are dropped.
std::vector<StepRange> window_ranges(std::size_t steps, const WindowingConfig& cfg);

struct Window {
  StepRange range;
  Matrix features;             // T_w x N, modalities concatenated
  std::vector<double> labels;  // T_w
};

std::vector<Window> make_windows(const AlignedSample& sample, const WindowingConfig& cfg, Dimension dimension);

struct TrainConfig {
  WindowingConfig stage1_window{200, 100};
  WindowingConfig stage2_window{10, 5};
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t patience = 15;
  /// Seeds the epoch shuffles of pretraining.
  std::uint64_t shuffle_seed = 0;

  double finetune_lr = 1e-4;
  std::size_t finetune_batch_size = 8;
  std::size_t finetune_max_epochs = 50;
  std::size_t finetune_patience = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  /// Worker threads for the seed sweep; results never depend on it.
  std::size_t jobs = 1;
  /// One line per epoch when set.
  std::ostream* log = nullptr;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_ccc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the starting parameters were kept
  double best_dev_ccc = 0.0;
  double wall_seconds = 0.0;
};

/// `epoch,train_loss,dev_ccc`; wall time is deliberately left out so reports
/// of identical runs are byte-identical.
void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report);

struct PretrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

/// Global (stage-1) training. Corpora are raw; normalisation statistics are
/// fitted on `train` and stored in the checkpoint.
PretrainResult pretrain(const Corpus& train, const Corpus& dev, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg, Dimension dimension);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double dev_ccc = 0.0;
  TrainReport report;
};

struct PersonaliseResult {
  Checkpoint checkpoint;
  std::uint64_t seed = 0;
  double dev_ccc = 0.0;
  std::vector<SeedOutcome> sweep;  // in seed-list order
  std::vector<Model> models;       // per seed, same order as sweep
};

/// Stage-2 fine-tuning of a copy of `pretrained` per seed on the subject's
/// personal_train segment, selected on personal_dev CCC (ties: earliest seed
/// in the list). `sample` is raw; the pretrained normalisation is applied.
PersonaliseResult personalise(const Checkpoint& pretrained, const AlignedSample& sample, const SubjectSplit& split,
                              const TrainConfig& train_cfg, Dimension dimension);

/// One unsegmented pass over an already normalised sample.
PredictionSequence predict_full(const Model& model, const AlignedSample& sample, Dimension dimension);

/// Normalises `sample` with the checkpoint statistics, then predict_full.
PredictionSequence predict_subject(const Checkpoint& checkpoint, const AlignedSample& sample, Dimension dimension);

/// CCC of a prediction against the sample's labels on `range`; a degenerate
/// pair scores 0.
double segment_ccc(const PredictionSequence& pred, const AlignedSample& sample, Dimension dimension,
                   StepRange range);

}  // namespace musep
