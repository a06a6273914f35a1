#include "musep/checkpoint.hpp"

#include "musep/error.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace musep {

namespace {

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorCode::CorruptPayload, "checkpoint truncated");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Model& model, const NormStats& stats) {
  const auto& c = model.config;
  Writer w;
  w.bytes(kCheckpointMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);

  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.input_dims.size()));
  for (const auto n : c.input_dims) w.uint<std::uint64_t>(n);
  w.uint<std::uint64_t>(c.fused_dim);
  w.uint<std::uint64_t>(c.rnn_layers);
  w.uint<std::uint8_t>(c.rnn_bidirectional ? 1 : 0);
  w.uint<std::uint64_t>(c.head_hidden);
  w.uint<std::uint64_t>(c.seed);

  w.uint<std::uint32_t>(static_cast<std::uint32_t>(stats.modalities.size()));
  for (const auto& m : stats.modalities) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.name.size()));
    w.bytes(m.name);
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(m.mean.size()));
    for (Eigen::Index i = 0; i < m.mean.size(); ++i) w.f64(m.mean[i]);
    for (Eigen::Index i = 0; i < m.std.size(); ++i) w.f64(m.std[i]);
  }

  w.uint<std::uint64_t>(model.parameter_count());
  // Row-major storage makes data() order the documented flattening order.
  for (const auto& p : model.params) {
    for (Eigen::Index i = 0; i < p.size(); ++i) w.f64(p.data()[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(ErrorCode::BadMagic, "not a checkpoint file");
  }
  Reader r(bytes.substr(kCheckpointMagic.size()));
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(version));
  }

  ModelConfig c;
  const auto n_inputs = r.uint<std::uint32_t>();
  if (n_inputs > r.remaining() / 8) fail(ErrorCode::CorruptPayload, "implausible modality count");
  for (std::uint32_t i = 0; i < n_inputs; ++i) c.input_dims.push_back(r.uint<std::uint64_t>());
  c.fused_dim = r.uint<std::uint64_t>();
  c.rnn_layers = r.uint<std::uint64_t>();
  c.rnn_bidirectional = r.uint<std::uint8_t>() != 0;
  c.head_hidden = r.uint<std::uint64_t>();
  c.seed = r.uint<std::uint64_t>();

  Checkpoint ck;
  const auto n_mods = r.uint<std::uint32_t>();
  for (std::uint32_t m = 0; m < n_mods; ++m) {
    ModalityStats ms;
    ms.name = std::string(r.bytes(r.uint<std::uint32_t>()));
    const auto n = r.uint<std::uint64_t>();
    if (n > r.remaining() / 16) fail(ErrorCode::CorruptPayload, "norm stats truncated");
    ms.mean.resize(static_cast<Eigen::Index>(n));
    ms.std.resize(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) ms.mean[static_cast<Eigen::Index>(i)] = r.f64();
    for (std::uint64_t i = 0; i < n; ++i) ms.std[static_cast<Eigen::Index>(i)] = r.f64();
    ck.stats.modalities.push_back(std::move(ms));
  }

  try {
    ck.model = zero_model(c);
  } catch (const Error& e) {
    fail(ErrorCode::CorruptPayload, std::string("invalid model config: ") + e.what());
  }
  const auto count = r.uint<std::uint64_t>();
  if (count != ck.model.parameter_count()) {
    fail(ErrorCode::CorruptPayload, "parameter count " + std::to_string(count) + " does not match config (" +
                                        std::to_string(ck.model.parameter_count()) + ")");
  }
  if (r.remaining() != count * 8) {
    fail(ErrorCode::CorruptPayload, "payload length " + std::to_string(r.remaining()) + " bytes, expected " +
                                        std::to_string(count * 8));
  }
  for (auto& p : ck.model.params) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = r.f64();
  }
  return ck;
}

void save_checkpoint(const Model& model, const NormStats& stats, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const std::string bytes = encode_checkpoint(model, stats);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace musep
