#include "grids/checkpoint.hpp"

#include <sstream>

#include "detail/bytes.hpp"
#include "grids/config_text.hpp"
#include "grids/errors.hpp"
#include "grids/io.hpp"

namespace grids {

namespace {

constexpr std::string_view kMagic = "GRCKPT1";

std::string header_line(std::string_view config_text, std::size_t param_count) {
  return std::string(kMagic) + " " + std::to_string(kCheckpointVersion) + " " +
         hex64(fnv1a64(config_text)) + " " + std::to_string(config_text.size()) + " " +
         std::to_string(param_count) + "\n";
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncatedError(std::string("GRCKPT1: truncated while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[3])) << 24);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t checkpoint_size(const ParameterStore& params, std::string_view config_text) {
  std::size_t n = header_line(config_text, params.size()).size() + config_text.size();
  for (const auto& p : params) {
    n += 4 + p.name.size() + 4 + 4 * p.shape.size() + 4 * p.numel();
  }
  return n;
}

std::string checkpoint_bytes(const ParameterStore& params, std::string_view config_text) {
  std::ostringstream out(std::ios::binary);
  out << header_line(config_text, params.size());
  out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  for (const auto& p : params) {
    detail::write_u32_le(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_u32_le(out, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) detail::write_u32_le(out, static_cast<std::uint32_t>(d));
    detail::write_f32_le(out, p.values);
  }
  return std::move(out).str();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes) {
      throw TruncatedError("GRCKPT1: file ends inside the magic");
    }
    throw BadMagicError("GRCKPT1: bad magic");
  }
  if (nl == std::string_view::npos) throw TruncatedError("GRCKPT1: header line not terminated");

  std::istringstream hs{std::string(bytes.substr(0, nl))};
  std::string magic, digest_hex;
  std::uint64_t version = 0, config_bytes = 0, param_count = 0;
  if (!(hs >> magic >> version >> digest_hex >> config_bytes >> param_count) || magic != kMagic ||
      digest_hex.size() != 16) {
    throw FormatError("GRCKPT1: malformed header line");
  }
  Checkpoint ck;
  ck.format_version = static_cast<std::uint32_t>(version);
  if (ck.format_version != kCheckpointVersion) {
    throw FormatError("GRCKPT1: unsupported format version " + std::to_string(version));
  }
  ck.config_digest = std::stoull(digest_hex, nullptr, 16);

  Reader r(bytes.substr(nl + 1));
  ck.config_text = std::string(r.take(config_bytes, "config text"));
  if (fnv1a64(ck.config_text) != ck.config_digest) {
    throw FormatError("GRCKPT1: config digest does not match config text");
  }
  for (std::uint64_t n = 0; n < param_count; ++n) {
    CheckpointEntry e;
    const auto name_len = r.u32("parameter name length");
    e.name = std::string(r.take(name_len, "parameter name"));
    const auto rank = r.u32("parameter rank");
    if (rank == 0 || rank > 8) {
      throw ShapeMismatchError("GRCKPT1: parameter '" + e.name + "' has invalid rank " +
                               std::to_string(rank));
    }
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.u32("parameter dims");
      if (dim == 0) throw ShapeMismatchError("GRCKPT1: parameter '" + e.name + "' has a zero dim");
      e.shape.push_back(dim);
      numel *= dim;
    }
    if (numel > r.remaining() / 4) {
      throw TruncatedError("GRCKPT1: truncated values for parameter '" + e.name + "'");
    }
    const auto raw = r.take(4 * numel, "parameter values");
    std::istringstream vs{std::string(raw)};
    e.values = detail::read_f32_le(vs, numel);
    ck.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw FormatError("GRCKPT1: " + std::to_string(r.remaining()) + " trailing bytes after records");
  }
  return ck;
}

void checkpoint_save(const std::filesystem::path& path, const ParameterStore& params,
                     const ExperimentConfig& cfg) {
  write_file_atomic(path, checkpoint_bytes(params, format_experiment_config(cfg)));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void apply_checkpoint(const Checkpoint& ckpt, ParameterStore& params) {
  if (ckpt.entries.size() != params.size()) {
    throw ShapeMismatchError("checkpoint has " + std::to_string(ckpt.entries.size()) +
                             " parameters, store has " + std::to_string(params.size()));
  }
  for (const auto& e : ckpt.entries) {
    if (!params.contains(e.name)) {
      throw ShapeMismatchError("checkpoint parameter '" + e.name + "' not in store");
    }
    if (params.get(e.name).shape != e.shape) {
      throw ShapeMismatchError("checkpoint parameter '" + e.name + "' has a different shape");
    }
  }
  for (const auto& e : ckpt.entries) params.get(e.name).values = e.values;
}

ParameterStore store_from_checkpoint(const Checkpoint& ckpt) {
  ParameterStore store;
  for (const auto& e : ckpt.entries) store.add(e.name, e.shape).values = e.values;
  return store;
}

}  // namespace grids
