#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hicl {

using TokenId = std::uint32_t;

inline constexpr std::uint32_t kVocabBits = 15;
inline constexpr std::uint32_t kVocabSize = 1u << kVocabBits;

/// Hashing tokenizer.
///
/// Text is split into maximal runs of word bytes: ASCII letters and digits,
/// plus every byte >= 0x80 so UTF-8 sequences stay intact. ASCII letters
/// are lowercased. Everything else (whitespace, punctuation) separates
/// tokens and is dropped. Each word is hashed with 64-bit FNV-1a; the hash
/// is xor-folded to 32 bits and then to kVocabBits bits.
std::vector<TokenId> tokenize(std::string_view text);

/// The words tokenize() hashes, in order, with case preserved.
std::vector<std::string_view> split_words(std::string_view text);

TokenId hash_token(std::string_view word);

}  // namespace hicl
