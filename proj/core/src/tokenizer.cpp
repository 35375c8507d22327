#include "hicl/tokenizer.hpp"

#include <cctype>
#include <string>

namespace hicl {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

}  // namespace

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

TokenId hash_token(std::string_view word) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : word) {
    if (c < 0x80) c = static_cast<unsigned char>(std::tolower(c));
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  auto folded = static_cast<std::uint32_t>(h ^ (h >> 32));
  folded ^= folded >> kVocabBits;
  folded ^= folded >> (2 * kVocabBits);
  return folded & (kVocabSize - 1);
}

std::vector<TokenId> tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  for (std::string_view w : split_words(text)) ids.push_back(hash_token(w));
  return ids;
}

}  // namespace hicl
