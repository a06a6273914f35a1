#pragma once

#include "musep/nn.hpp"
#include "musep/training.hpp"
#include "musep/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace musep {

/// Resolved run configuration. Text form, one `key = value` per line, '#'
/// comments, dotted keys for the two training stages:
///
///     manifest = corpus/manifest.txt     (required, relative to the config file)
///     combo = audio+video                (required, '+'-joined modality names)
///     dimension = arousal                (required: arousal, valence, or both)
///     output_dir = runs/a                (default: $MUSEP_OUT/<config stem>, else ./runs/<stem>)
///     seed = 0                           (model init and stage-1 shuffling)
///     jobs = 1
///     model_dim = 256   rnn_layers = 1   rnn_bi = false   head_hidden = model_dim / 2
///     pretrain.lr, pretrain.batch_size, pretrain.max_epochs, pretrain.patience,
///     pretrain.win_steps, pretrain.hop_steps
///     finetune.lr, finetune.batch_size, finetune.max_epochs, finetune.patience,
///     finetune.win_steps, finetune.hop_steps, finetune.seeds (comma list)
struct RunConfig {
  std::filesystem::path source;  // config file, empty when parsed from text
  std::filesystem::path manifest;
  std::string combo;
  std::vector<std::string> modalities;
  std::vector<Dimension> dimensions;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  std::size_t model_dim = 256;
  std::size_t rnn_layers = 1;
  bool rnn_bi = false;
  std::size_t head_hidden = 0;  // 0: model_dim / 2

  TrainConfig train;
  std::vector<std::string> warnings;

  ModelConfig model_config(std::vector<std::size_t> input_dims) const;
};

/// Parses and validates: unknown keys, missing required keys, values of the
/// wrong type and paths that do not exist are all errors naming the key.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir,
                            std::string_view stem = "run");

/// Canonical text form with every key spelled out; parsing it yields the
/// same configuration.
std::string render_config(const RunConfig& config);

}  // namespace musep
