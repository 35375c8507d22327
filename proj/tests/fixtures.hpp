#pragma once

#include <cstdint>
#include <vector>

#include "hicl/contrastive.hpp"
#include "hicl/encoder.hpp"
#include "hicl/rng.hpp"

namespace hicl::test {

inline EncoderShape tiny_shape(std::size_t vocab = 40, std::size_t dim = 6, std::vector<std::size_t> widths = {2, 4}) {
  EncoderShape s;
  s.vocab = vocab;
  s.dim = dim;
  s.level_widths = std::move(widths);
  return s;
}

/// Random init with a larger scale so tanh units are not all near zero.
inline EncoderParams tiny_params(std::uint64_t seed, const EncoderShape& shape = tiny_shape()) {
  EncoderParams p = EncoderParams::initialize(shape, seed, 0.5);
  Rng rng(seed ^ 0xabcdefULL);
  for (int j = 1; j <= p.depth(); ++j) {
    for (double& b : p.bias(j)) b = rng.uniform_real(-0.2, 0.2);
  }
  return p;
}

inline std::vector<TokenId> random_tokens(Rng& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len) {
  std::size_t n = min_len + rng.uniform_index(max_len - min_len + 1);
  std::vector<TokenId> out(n);
  for (auto& t : out) t = static_cast<TokenId>(rng.uniform_index(vocab));
  return out;
}

inline GroupMember random_member(Rng& rng, std::size_t vocab, std::string source) {
  GroupMember m;
  m.source = std::move(source);
  m.tokens = random_tokens(rng, vocab, 2, 7);
  return m;
}

inline ContrastiveGroup random_group(std::uint64_t seed, std::size_t vocab = 40, std::size_t hard = 2,
                                     std::size_t random = 3) {
  Rng rng(seed);
  ContrastiveGroup g;
  g.anchor = random_member(rng, vocab, "anchor");
  g.positive = random_member(rng, vocab, "positive");
  for (std::size_t i = 0; i < hard; ++i) g.hard_negatives.push_back(random_member(rng, vocab, "hard"));
  for (std::size_t i = 0; i < random; ++i) g.random_negatives.push_back(random_member(rng, vocab, "random"));
  return g;
}

}  // namespace hicl::test
