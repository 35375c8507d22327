#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hicl/corpus.hpp"
#include "hicl/encoder.hpp"
#include "hicl/llm_client.hpp"
#include "hicl/retrieval.hpp"
#include "hicl/taxonomy.hpp"

namespace hicl {

struct Demonstration {
  std::string doc_id;
  std::string text;
  LabelPath path;
  double score = 0.0;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

/// doc id -> text, used to show demonstration texts.
using DocumentStore = std::unordered_map<std::string, std::string>;
DocumentStore make_document_store(const std::vector<Document>& docs);

enum class FallbackPolicy { TopRanked, Consistent };

FallbackPolicy parse_fallback_policy(std::string_view text);
std::string_view to_string(FallbackPolicy policy);

struct InferenceConfig {
  std::size_t k = 3;
  double temperature = 0.2;
  bool iterative = true;
  bool demos = true;          // show demonstration blocks in the prompt
  bool pruning = true;        // intersect children with demo labels
  bool candidate_set = true;  // off: ask the LLM to pick the most similar demo
  FallbackPolicy fallback = FallbackPolicy::TopRanked;
  bool per_level_retrieval = false;  // re-rank inside the current subtree at each level
  DiversityKey diversity = DiversityKey::FullPath;

  void validate() const;
};

/// Ranked demonstrations for a query plus the full ranking's paths (needed
/// by the fallback rules).
struct RetrievedDemos {
  std::vector<Demonstration> demos;
  std::vector<LabelPath> ranked_paths;
};

RetrievedDemos retrieve_demos(std::span<const float> query, const RetrievalDatabase& db, const DocumentStore& store,
                              std::size_t k, DiversityKey key = DiversityKey::FullPath,
                              const Taxonomy* taxonomy = nullptr);

/// Children of `current` that carry a demo's level-`level` label, in demo
/// rank order; all children when pruning is off or the intersection is
/// empty. Empty when candidate_set is off. Throws if `current` is a leaf.
std::vector<NodeId> candidate_label_set(const Taxonomy& taxonomy, NodeId current,
                                        const std::vector<Demonstration>& demos, int level,
                                        const InferenceConfig& cfg);

/// Level prompt: one block per demo (its own level-(j-1) and level-j
/// labels), then the query block.
std::string assemble_prompt_level(const Taxonomy& taxonomy, std::string_view query_text, NodeId current,
                                  const std::vector<Demonstration>& demos, const std::vector<NodeId>& candidates,
                                  int level);

enum class MatchKind { Exact, CaseInsensitive, Contained, None };

std::string_view to_string(MatchKind kind);

struct LabelMatch {
  std::optional<std::size_t> index;  // into the candidate list
  MatchKind kind = MatchKind::None;
};

/// Exact, then case-insensitive, then whitespace-normalized whole-word
/// containment of exactly one candidate.
LabelMatch match_label(std::string_view reply, const std::vector<std::string>& candidates);

struct LevelDecision {
  NodeId label = kRootId;
  bool fallback_used = false;
  MatchKind match = MatchKind::None;
  /// Set when the fallback had to adopt a whole path (the remaining levels
  /// are taken from it and iteration stops).
  std::optional<LabelPath> adopted_path;
};

/// Matches the reply against the candidates; on no match applies the
/// fallback policy using the retrieval ranking.
LevelDecision parse_llm_label(std::string_view reply, const std::vector<NodeId>& candidates, const Taxonomy& taxonomy,
                              NodeId current, int level, const RetrievedDemos& retrieved, FallbackPolicy policy);

struct LevelRecord {
  int level = 0;  // 0 for single-call modes
  NodeId current = kRootId;
  std::vector<std::string> demo_ids;
  std::vector<std::string> candidates;
  bool llm_called = false;
  std::string reply;
  NodeId parsed = kRootId;
  std::string parsed_label;
  bool fallback_used = false;
  bool forced = false;  // single candidate, reply ignored
  MatchKind match = MatchKind::None;

  friend bool operator==(const LevelRecord&, const LevelRecord&) = default;
};

struct InferenceTrace {
  std::string mode;  // iterative | path | pick-example
  std::vector<Demonstration> demos;
  std::vector<LevelRecord> levels;
  LabelPath predicted;
  std::size_t llm_calls = 0;
  bool adopted_whole_path = false;
  std::string template_hash;
  std::string db_fingerprint;

  /// JSON document with names resolved through the taxonomy.
  std::string to_json(const Taxonomy& taxonomy) const;

  friend bool operator==(const InferenceTrace&, const InferenceTrace&) = default;
};

InferenceTrace classify_iterative(std::string_view query_text, const RetrievalDatabase& db,
                                  const EncoderParams& params, const Taxonomy& taxonomy, const DocumentStore& store,
                                  const InferenceConfig& cfg, LlmClient& llm);

/// Same, with the query already encoded.
InferenceTrace classify_iterative(std::string_view query_text, std::span<const float> query_vectors,
                                  const RetrievalDatabase& db, const Taxonomy& taxonomy, const DocumentStore& store,
                                  const InferenceConfig& cfg, LlmClient& llm);

/// Full path of the most similar stored instance (lower ordinal on ties).
LabelPath classify_retrieval_only(std::string_view query_text, const RetrievalDatabase& db,
                                  const EncoderParams& params);
LabelPath classify_retrieval_only(std::span<const float> query_vectors, const RetrievalDatabase& db);

/// Encodes a query text into index vectors; ConfigError if it has no tokens.
std::vector<float> encode_query(std::string_view text, const EncoderParams& params);

/// Returns the leaf's stored description, or asks the LLM for one and
/// stores it. `force` ignores a stored description.
std::string generate_label_description(Taxonomy& taxonomy, const LabelPath& path, LlmClient& llm,
                                       double temperature = 0.2, bool force = false);

/// Describes every leaf; returns the number of LLM calls made.
std::size_t describe_all_leaves(Taxonomy& taxonomy, LlmClient& llm, double temperature = 0.2, bool force = false);

}  // namespace hicl
