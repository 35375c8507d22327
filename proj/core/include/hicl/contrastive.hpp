#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "hicl/corpus.hpp"
#include "hicl/rng.hpp"
#include "hicl/taxonomy.hpp"

namespace hicl {

/// A text taking part in a contrastive group: a training document or a
/// leaf's label text (description, path text or leaf name).
struct GroupMember {
  std::string source;  // document id, or "label:<qualified leaf>"
  std::vector<TokenId> tokens;
  LabelPath path;
  bool is_label_text = false;
};

struct ContrastiveGroup {
  GroupMember anchor;
  GroupMember positive;
  std::vector<GroupMember> hard_negatives;
  std::vector<GroupMember> random_negatives;

  std::size_t size() const { return 2 + hard_negatives.size() + random_negatives.size(); }
  std::vector<const GroupMember*> negatives() const;
};

/// Pairwise cosine between bag-of-token-count vectors of leaf label texts,
/// with a per-leaf list of the most similar other leaves.
class DescriptionSimilarity {
 public:
  static DescriptionSimilarity build(const Taxonomy& taxonomy, LabelTextMode mode, std::size_t top_n = 4);

  double similarity(NodeId leaf_a, NodeId leaf_b) const;
  /// Most similar other leaves, descending similarity, ties by lower id.
  const std::vector<NodeId>& top(NodeId leaf) const;
  std::size_t leaf_count() const { return leaves_.size(); }

 private:
  std::vector<NodeId> leaves_;
  std::unordered_map<NodeId, std::size_t> slot_;
  std::vector<double> matrix_;  // leaf_count x leaf_count
  std::vector<std::vector<NodeId>> top_;
};

DescriptionSimilarity build_desc_similarity(const Taxonomy& taxonomy, LabelTextMode mode);

/// Cosine of bag-of-token-count vectors of two texts.
double bag_of_tokens_cosine(std::string_view a, std::string_view b);

struct GroupSizes {
  std::size_t hard_negatives = 4;
  std::size_t random_negatives = 10;
};

/// Builds contrastive groups over a fixed training set.
///
/// positive: another document with the anchor's path, else the anchor
///   leaf's label text.
/// hard negatives: drawn from the documents and label texts of the anchor
///   leaf's top description-similar leaves.
/// random negatives: documents with any other path (label texts of other
///   leaves if there are none).
/// Pools smaller than the requested count are sampled with replacement.
class ContrastiveSampler {
 public:
  ContrastiveSampler(const std::vector<Document>& trainset, const Taxonomy& taxonomy,
                     const DescriptionSimilarity& similarity, LabelTextMode mode, GroupSizes sizes = {});

  ContrastiveGroup select(std::size_t anchor_index, Rng& rng) const;

 private:
  GroupMember doc_member(std::size_t index) const;
  std::vector<std::size_t> draw(std::size_t pool_size, std::size_t count, Rng& rng) const;

  const std::vector<Document>& trainset_;
  const Taxonomy& taxonomy_;
  const DescriptionSimilarity& similarity_;
  GroupSizes sizes_;
  std::unordered_map<NodeId, std::vector<std::size_t>> docs_by_leaf_;
  std::unordered_map<NodeId, GroupMember> label_members_;
};

ContrastiveGroup select_contrastive_group(std::size_t anchor_index, const std::vector<Document>& trainset,
                                          const Taxonomy& taxonomy, const DescriptionSimilarity& similarity,
                                          LabelTextMode mode, Rng& rng);

}  // namespace hicl
