#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/taxonomy.hpp"
#include "hicl/tokenizer.hpp"

namespace hicl {

struct Document {
  std::string id;
  std::string text;
  std::vector<TokenId> tokens;
  LabelPath gold;
};

enum class SamplingMode { Balanced, Imbalanced };

SamplingMode parse_sampling_mode(std::string_view text);

struct FewShotConfig {
  std::size_t q = 1;  // shots per label path
  std::uint64_t seed = 171;
  SamplingMode mode = SamplingMode::Balanced;
};

/// Corpus file: JSON lines, one object per document:
///
///     {"id": "d1", "text": "...", "labels": ["level-1 name", ..., "level-C name"]}
///
/// `id` is optional (defaults to the 1-based line number). Errors carry the
/// line number.
std::vector<Document> parse_corpus(std::string_view text, const Taxonomy& taxonomy);
std::vector<Document> load_corpus(const std::filesystem::path& file, const Taxonomy& taxonomy);

std::string serialize_document(const Document& doc, const Taxonomy& taxonomy);
void save_corpus(const std::filesystem::path& file, const std::vector<Document>& docs, const Taxonomy& taxonomy);

/// Groups by full label path (first-occurrence order); keeps every document
/// of a group with at most q members, otherwise a uniform sample of q.
/// Output keeps corpus order within each group.
std::vector<Document> sample_few_shot(const std::vector<Document>& corpus, const FewShotConfig& cfg);

/// Per path, draws n uniformly from [0, min(count, q)] and samples n documents.
std::vector<Document> sample_imbalanced(const std::vector<Document>& corpus, const FewShotConfig& cfg);

/// Dispatches on cfg.mode.
std::vector<Document> sample(const std::vector<Document>& corpus, const FewShotConfig& cfg);

}  // namespace hicl
