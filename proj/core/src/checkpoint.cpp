#include "fedcigar/checkpoint.hpp"

#include "fedcigar/error.hpp"

#include <algorithm>
#include <iomanip>

namespace fedcigar {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

bool has_prefix(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

GlobalModelParams global_params_from_tensors(std::vector<ad::Tensor> tensors) {
  GlobalModelParams p;
  for (auto& t : tensors) {
    if (has_prefix(t.name, "enc_f.")) p.enc_f.push_back(std::move(t));
    else if (has_prefix(t.name, "enc_s.")) p.enc_s.push_back(std::move(t));
    else if (has_prefix(t.name, "fusion.")) p.fusion.push_back(std::move(t));
    else if (has_prefix(t.name, "dec_f.")) p.dec_f.push_back(std::move(t));
    else throw FormatError("<blob>", 0, "unexpected tensor '" + t.name + "' in global parameters");
  }
  if (p.enc_f.empty() || p.enc_s.empty() || p.dec_f.empty() || p.fusion.size() != 4 ||
      p.enc_f.size() != p.enc_s.size() || p.enc_f.size() != p.dec_f.size())
    throw FormatError("<blob>", 0, "incomplete global parameter set");
  p.dims.feature_dim = static_cast<int>(p.enc_f.front().rows());
  p.dims.structure_dim = static_cast<int>(p.enc_s.front().rows());
  p.dims.hidden = static_cast<int>(p.fusion[1].cols());
  p.dims.latent = static_cast<int>(p.fusion[3].cols());
  p.dims.layers = static_cast<int>(p.enc_f.size());
  return p;
}

void write_global_params(ByteWriter& out, const GlobalModelParams& params) {
  write_param_blob(out, params.tensors());
}

GlobalModelParams read_global_params(ByteReader& in) {
  return global_params_from_tensors(read_param_blob(in));
}

Bytes encode_checkpoint(const GlobalCheckpoint& ckpt) {
  static constexpr std::uint8_t magic[] = {'F', 'C', 'G', 'K'};
  ByteWriter w;
  w.raw(magic);
  w.u32(kCheckpointVersion);
  const auto& d = ckpt.params.dims;
  for (int v : {d.feature_dim, d.structure_dim, d.hidden, d.latent, d.layers})
    w.u32(static_cast<std::uint32_t>(v));
  w.u64(ckpt.seed);
  write_global_params(w, ckpt.params);
  return w.take();
}

Bytes encode_checkpoint(const GatingCheckpoint& ckpt) {
  static constexpr std::uint8_t magic[] = {'F', 'C', 'G', 'L'};
  ByteWriter w;
  w.raw(magic);
  w.u32(kCheckpointVersion);
  w.f64(ckpt.params.tau);
  w.u32(ckpt.params.uses_structure ? 1 : 0);
  w.u64(ckpt.seed);
  write_param_blob(w, ckpt.params.tensors());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("<checkpoint>", 0, "file too short");
  ByteReader r(bytes);
  const bool gating = bytes[3] == 'L';
  r.expect_magic(gating ? "FCGL" : "FCGK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("<checkpoint>", 4, "unsupported version " + std::to_string(version));

  if (gating) {
    GatingCheckpoint ckpt;
    ckpt.params.tau = r.f64();
    ckpt.params.uses_structure = r.u32() != 0;
    ckpt.seed = r.u64();
    ckpt.params.lpm = read_param_blob(r);
    return ckpt;
  }
  ModelDims header;
  header.feature_dim = static_cast<int>(r.u32());
  header.structure_dim = static_cast<int>(r.u32());
  header.hidden = static_cast<int>(r.u32());
  header.latent = static_cast<int>(r.u32());
  header.layers = static_cast<int>(r.u32());
  GlobalCheckpoint ckpt;
  ckpt.seed = r.u64();
  ckpt.params = read_global_params(r);
  if (!(ckpt.params.dims == header))
    throw FormatError("<checkpoint>", 0, "header dims disagree with tensor shapes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const GlobalCheckpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

void save_checkpoint(const std::filesystem::path& path, const GatingCheckpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return decode_checkpoint(bytes);
}

namespace {

void describe_tensors(std::ostream& os, const std::vector<const ad::Tensor*>& tensors) {
  std::size_t total = 0;
  for (const auto* t : tensors) {
    os << "  " << std::left << std::setw(12) << t->name << std::right << t->rows() << "x"
       << t->cols() << "  |w|=" << std::setprecision(6) << t->value.norm() << '\n';
    total += static_cast<std::size_t>(t->value.size());
  }
  os << "parameters: " << total << '\n';
}

}  // namespace

void describe_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  if (const auto* g = std::get_if<GlobalCheckpoint>(&ckpt)) {
    const auto& d = g->params.dims;
    os << "kind: global model\n"
       << "seed: " << g->seed << '\n'
       << "dims: feature=" << d.feature_dim << " structure=" << d.structure_dim
       << " hidden=" << d.hidden << " latent=" << d.latent << " layers=" << d.layers << '\n';
    describe_tensors(os, g->params.tensors());
  } else {
    const auto& l = std::get<GatingCheckpoint>(ckpt);
    os << "kind: gating model\n"
       << "seed: " << l.seed << '\n'
       << "tau: " << l.params.tau << '\n'
       << "uses_structure: " << (l.params.uses_structure ? "true" : "false") << '\n';
    describe_tensors(os, l.params.tensors());
  }
}

}  // namespace fedcigar
