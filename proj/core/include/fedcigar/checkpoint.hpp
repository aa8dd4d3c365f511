#pragma once

// Checkpoint files.
//
// Global model:  "FCGK" | u32 version | u32 feature_dim | u32 structure_dim |
//                u32 hidden | u32 latent | u32 layers | u64 seed | parameter blob
// Gating model:  "FCGL" | u32 version | f64 tau | u32 uses_structure | u64 seed |
//                parameter blob

#include "fedcigar/gating.hpp"
#include "fedcigar/model.hpp"
#include "fedcigar/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <variant>

namespace fedcigar {

/// Rebuilds GlobalModelParams from named tensors (enc_f.*, enc_s.*, fusion.*,
/// dec_f.*), inferring the dims from the shapes.
GlobalModelParams global_params_from_tensors(std::vector<ad::Tensor> tensors);

void write_global_params(ByteWriter& out, const GlobalModelParams& params);
GlobalModelParams read_global_params(ByteReader& in);

struct GlobalCheckpoint {
  GlobalModelParams params;
  std::uint64_t seed = 0;
};

struct GatingCheckpoint {
  GatingParams params;
  std::uint64_t seed = 0;
};

Bytes encode_checkpoint(const GlobalCheckpoint& ckpt);
Bytes encode_checkpoint(const GatingCheckpoint& ckpt);

using Checkpoint = std::variant<GlobalCheckpoint, GatingCheckpoint>;
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const GlobalCheckpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const GatingCheckpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Human-readable summary: header fields and one line per tensor.
void describe_checkpoint(std::ostream& os, const Checkpoint& ckpt);

}  // namespace fedcigar
