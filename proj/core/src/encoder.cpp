#include "hicl/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "hicl/rng.hpp"

namespace hicl {

namespace {

constexpr char kParamsMagic[4] = {'H', 'P', 'R', 'M'};
constexpr std::uint16_t kParamsVersion = 1;

}  // namespace

std::size_t EncoderShape::parameter_count() const {
  std::size_t n = vocab * dim;
  n += level_widths.size() * (dim * dim + dim);
  for (std::size_t w : level_widths) n += w * dim;
  return n;
}

EncoderShape EncoderShape::for_taxonomy(const Taxonomy& taxonomy, std::size_t dim) {
  EncoderShape shape;
  shape.dim = dim;
  for (int j = 1; j <= taxonomy.depth(); ++j) shape.level_widths.push_back(taxonomy.level_width(j));
  return shape;
}

EncoderParams::EncoderParams(EncoderShape shape) : shape_(std::move(shape)), data_(shape_.parameter_count(), 0.0) {}

EncoderParams EncoderParams::initialize(EncoderShape shape, std::uint64_t seed, double scale) {
  EncoderParams p(std::move(shape));
  Rng rng(seed);
  for (double& v : p.embeddings()) v = rng.uniform_real(-scale, scale);
  for (int j = 1; j <= p.depth(); ++j) {
    for (double& v : p.projection(j)) v = rng.uniform_real(-scale, scale);
  }
  for (int j = 1; j <= p.depth(); ++j) {
    for (double& v : p.head(j)) v = rng.uniform_real(-scale, scale);
  }
  p.quantize();
  return p;
}

std::span<double> EncoderParams::embedding(TokenId token) {
  return {data_.data() + static_cast<std::size_t>(token) * shape_.dim, shape_.dim};
}
std::span<const double> EncoderParams::embedding(TokenId token) const {
  return {data_.data() + static_cast<std::size_t>(token) * shape_.dim, shape_.dim};
}

std::size_t EncoderParams::projection_offset(int level) const {
  if (level < 1 || level > depth()) throw NotFoundError("encoder has no level " + std::to_string(level));
  return shape_.vocab * shape_.dim + static_cast<std::size_t>(level - 1) * (shape_.dim * shape_.dim + shape_.dim);
}

std::size_t EncoderParams::head_offset(int level) const {
  if (level < 1 || level > depth()) throw NotFoundError("encoder has no level " + std::to_string(level));
  std::size_t off = shape_.vocab * shape_.dim + shape_.level_widths.size() * (shape_.dim * shape_.dim + shape_.dim);
  for (int j = 1; j < level; ++j) off += shape_.level_widths[static_cast<std::size_t>(j - 1)] * shape_.dim;
  return off;
}

std::span<double> EncoderParams::projection(int level) {
  return {data_.data() + projection_offset(level), shape_.dim * shape_.dim};
}
std::span<const double> EncoderParams::projection(int level) const {
  return {data_.data() + projection_offset(level), shape_.dim * shape_.dim};
}
std::span<double> EncoderParams::bias(int level) {
  return {data_.data() + projection_offset(level) + shape_.dim * shape_.dim, shape_.dim};
}
std::span<const double> EncoderParams::bias(int level) const {
  return {data_.data() + projection_offset(level) + shape_.dim * shape_.dim, shape_.dim};
}
std::span<double> EncoderParams::head(int level) {
  return {data_.data() + head_offset(level), shape_.level_widths[static_cast<std::size_t>(level - 1)] * shape_.dim};
}
std::span<const double> EncoderParams::head(int level) const {
  return {data_.data() + head_offset(level), shape_.level_widths[static_cast<std::size_t>(level - 1)] * shape_.dim};
}

void EncoderParams::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

void EncoderParams::quantize() {
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

bool EncoderParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

EncoderOutput encode(std::span<const TokenId> tokens, const EncoderParams& params) {
  if (tokens.empty()) throw ConfigError("encode: empty token list");
  const std::size_t d = params.dim();
  EncoderOutput out;
  out.pooled.assign(d, 0.0);
  out.hidden.reserve(tokens.size());
  for (TokenId tok : tokens) {
    if (tok >= params.shape().vocab) throw ConfigError("encode: token id " + std::to_string(tok) + " out of vocabulary");
    auto row = params.embedding(tok);
    out.hidden.emplace_back(row.begin(), row.end());
    for (std::size_t k = 0; k < d; ++k) out.pooled[k] += row[k];
  }
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (double& v : out.pooled) v *= inv_n;

  out.index.resize(static_cast<std::size_t>(params.depth()));
  for (int j = 1; j <= params.depth(); ++j) {
    auto a = params.projection(j);
    auto b = params.bias(j);
    auto& m = out.index[static_cast<std::size_t>(j - 1)];
    m.resize(d);
    for (std::size_t r = 0; r < d; ++r) {
      double z = b[r];
      const double* row = a.data() + r * d;
      for (std::size_t k = 0; k < d; ++k) z += row[k] * out.pooled[k];
      m[r] = std::tanh(z);
    }
  }
  return out;
}

void backward_encode(std::span<const TokenId> tokens, const EncoderOutput& out,
                     const std::vector<std::vector<double>>& d_index, const EncoderParams& params,
                     EncoderParams& grads, double scale) {
  const std::size_t d = params.dim();
  std::vector<double> d_pooled(d, 0.0);
  for (int j = 1; j <= params.depth(); ++j) {
    const auto& m = out.index[static_cast<std::size_t>(j - 1)];
    const auto& dm = d_index[static_cast<std::size_t>(j - 1)];
    auto a = params.projection(j);
    auto ga = grads.projection(j);
    auto gb = grads.bias(j);
    for (std::size_t r = 0; r < d; ++r) {
      const double dz = scale * dm[r] * (1.0 - m[r] * m[r]);
      if (dz == 0.0) continue;
      gb[r] += dz;
      double* grow = ga.data() + r * d;
      const double* arow = a.data() + r * d;
      for (std::size_t k = 0; k < d; ++k) {
        grow[k] += dz * out.pooled[k];
        d_pooled[k] += dz * arow[k];
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (TokenId tok : tokens) {
    auto ge = grads.embedding(tok);
    for (std::size_t k = 0; k < d; ++k) ge[k] += d_pooled[k] * inv_n;
  }
}

std::vector<float> index_vectors(const EncoderOutput& out) {
  std::vector<float> flat;
  for (const auto& m : out.index) {
    for (double v : m) flat.push_back(static_cast<float>(v));
  }
  return flat;
}

std::string serialize_params(const EncoderParams& params) {
  const EncoderShape& s = params.shape();
  ByteWriter w;
  w.bytes(std::string_view(kParamsMagic, 4));
  w.u16(kParamsVersion);
  w.u32(static_cast<std::uint32_t>(s.vocab));
  w.u32(static_cast<std::uint32_t>(s.dim));
  w.u8(static_cast<std::uint8_t>(s.depth()));
  for (std::size_t width : s.level_widths) w.u32(static_cast<std::uint32_t>(width));
  for (double v : params.values()) w.f32(static_cast<float>(v));
  w.u32(crc32(w.data()));
  return w.take();
}

EncoderParams deserialize_params(std::string_view bytes) {
  if (bytes.size() < 4 + 2 + 4 + 4 + 1 + 4) throw FormatError("params file truncated");
  {
    ByteReader tail(bytes.substr(bytes.size() - 4), "params file");
    if (crc32(bytes.substr(0, bytes.size() - 4)) != tail.u32()) throw FormatError("params file: checksum mismatch");
  }
  ByteReader r(bytes, "params file");
  if (r.bytes(4) != std::string_view(kParamsMagic, 4)) throw FormatError("params file: bad magic");
  std::uint16_t version = r.u16();
  if (version != kParamsVersion) {
    throw FormatError("params file: unsupported version " + std::to_string(version));
  }
  EncoderShape shape;
  shape.vocab = r.u32();
  shape.dim = r.u32();
  std::uint8_t depth = r.u8();
  for (std::uint8_t j = 0; j < depth; ++j) shape.level_widths.push_back(r.u32());
  const std::size_t expected = r.offset() + shape.parameter_count() * 4 + 4;
  if (bytes.size() != expected) {
    throw FormatError("params file: size " + std::to_string(bytes.size()) + " does not match declared shape (" +
                      std::to_string(expected) + " bytes)");
  }
  EncoderParams params(std::move(shape));
  for (double& v : params.values()) v = static_cast<double>(r.f32());
  if (!params.all_finite()) throw FormatError("params file: non-finite values");
  return params;
}

void save_params(const std::filesystem::path& file, const EncoderParams& params) {
  write_file_atomic(file, serialize_params(params));
}

EncoderParams load_params(const std::filesystem::path& file) {
  return deserialize_params(read_text_file(file));
}

}  // namespace hicl
