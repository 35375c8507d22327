#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hicl/taxonomy.hpp"
#include "hicl/tokenizer.hpp"

namespace hicl {

struct EncoderShape {
  std::size_t vocab = kVocabSize;
  std::size_t dim = 64;
  std::vector<std::size_t> level_widths;  // classifier width per level 1..C

  int depth() const { return static_cast<int>(level_widths.size()); }
  std::size_t parameter_count() const;

  static EncoderShape for_taxonomy(const Taxonomy& taxonomy, std::size_t dim = 64);

  friend bool operator==(const EncoderShape&, const EncoderShape&) = default;
};

/// All trainable tensors of the reference indexer, stored in one flat
/// buffer so optimizers and gradient checks can treat them uniformly.
///
/// Layout, in order:
///   embedding table E   vocab x dim (also the tied MLM output matrix)
///   for each level j:   projection A_j (dim x dim, row-major), bias b_j (dim)
///   for each level j:   classifier head W_j (width_j x dim)
///
/// The same type doubles as a gradient accumulator.
class EncoderParams {
 public:
  EncoderParams() = default;
  /// Zero-filled tensors of the given shape.
  explicit EncoderParams(EncoderShape shape);

  /// E, A_j and W_j from uniform(-scale, scale); biases zero. Values are
  /// rounded to float32 so a saved file reproduces them exactly.
  static EncoderParams initialize(EncoderShape shape, std::uint64_t seed, double scale = 0.05);

  const EncoderShape& shape() const { return shape_; }
  std::size_t dim() const { return shape_.dim; }
  int depth() const { return shape_.depth(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::span<double> embedding(TokenId token);
  std::span<const double> embedding(TokenId token) const;
  std::span<double> embeddings() { return {data_.data(), shape_.vocab * shape_.dim}; }
  std::span<const double> embeddings() const { return {data_.data(), shape_.vocab * shape_.dim}; }
  /// Level is 1-based.
  std::span<double> projection(int level);
  std::span<const double> projection(int level) const;
  std::span<double> bias(int level);
  std::span<const double> bias(int level) const;
  std::span<double> head(int level);
  std::span<const double> head(int level) const;

  void set_zero();
  /// Rounds every value to the nearest float32.
  void quantize();
  bool all_finite() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

 private:
  std::size_t projection_offset(int level) const;
  std::size_t head_offset(int level) const;

  EncoderShape shape_;
  std::vector<double> data_;
};

/// Index vectors and hidden states for one text.
struct EncoderOutput {
  std::vector<std::vector<double>> index;   // m_1..m_C, each dim wide
  std::vector<double> pooled;               // t: mean token embedding
  std::vector<std::vector<double>> hidden;  // h_1..h_n: per-token embeddings
};

/// t = mean of E rows; m_j = tanh(A_j t + b_j). Throws on an empty token
/// list or a token outside the vocabulary.
EncoderOutput encode(std::span<const TokenId> tokens, const EncoderParams& params);

/// Backpropagates dL/dm_j into `grads` (accumulating, scaled by `scale`).
void backward_encode(std::span<const TokenId> tokens, const EncoderOutput& out,
                     const std::vector<std::vector<double>>& d_index, const EncoderParams& params,
                     EncoderParams& grads, double scale = 1.0);

/// C index vectors flattened level-major, rounded to float32. This is the
/// representation stored in and queried against the retrieval database.
std::vector<float> index_vectors(const EncoderOutput& out);

/// Params file: "HPRM", version u16, vocab u32, dim u32, C u8, C level
/// widths u32, then every tensor as little-endian f32 in layout order,
/// then a CRC32 of everything before it.
std::string serialize_params(const EncoderParams& params);
EncoderParams deserialize_params(std::string_view bytes);
void save_params(const std::filesystem::path& file, const EncoderParams& params);
EncoderParams load_params(const std::filesystem::path& file);

}  // namespace hicl
