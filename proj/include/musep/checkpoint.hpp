#pragma once

#include "musep/nn.hpp"
#include "musep/seqdata.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace musep {

struct Checkpoint {
  Model model;
  NormStats stats;
};

/// Binary layout, all integers and floats little-endian:
///
///     magic         8 bytes  "MUSEPCKP"
///     version       u32      (currently 1)
///     config        u32 n_inputs, u64 x n_inputs widths, u64 fused_dim,
///                   u64 rnn_layers, u8 bidirectional, u64 head_hidden, u64 seed
///     norm stats    u32 n_modalities, then per modality:
///                   u32 name_len, name bytes, u64 n, f64 x n mean, f64 x n std
///     parameters    u64 value_count, f64 x value_count
///
/// Parameters follow the order documented on ParamSet, each tensor flattened
/// row-major. The file must end exactly after the last value.
inline constexpr std::string_view kCheckpointMagic = "MUSEPCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model, const NormStats& stats);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const NormStats& stats, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace musep
