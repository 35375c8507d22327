#include "hicl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hicl/error.hpp"

namespace hicl {

namespace {

std::map<TokenId, double> token_counts(std::string_view text) {
  std::map<TokenId, double> counts;
  for (TokenId t : tokenize(text)) counts[t] += 1.0;
  return counts;
}

double counts_cosine(const std::map<TokenId, double>& a, const std::map<TokenId, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, c] : a) {
    na += c * c;
    if (auto it = b.find(tok); it != b.end()) dot += c * it->second;
  }
  for (const auto& [tok, c] : b) nb += c * c;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<const GroupMember*> ContrastiveGroup::negatives() const {
  std::vector<const GroupMember*> out;
  for (const auto& m : hard_negatives) out.push_back(&m);
  for (const auto& m : random_negatives) out.push_back(&m);
  return out;
}

double bag_of_tokens_cosine(std::string_view a, std::string_view b) {
  return counts_cosine(token_counts(a), token_counts(b));
}

DescriptionSimilarity DescriptionSimilarity::build(const Taxonomy& taxonomy, LabelTextMode mode, std::size_t top_n) {
  DescriptionSimilarity sim;
  auto leaves = taxonomy.leaves();
  sim.leaves_.assign(leaves.begin(), leaves.end());
  const std::size_t n = sim.leaves_.size();
  std::vector<std::map<TokenId, double>> counts;
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim.slot_[sim.leaves_[i]] = i;
    counts.push_back(token_counts(taxonomy.label_text(taxonomy.path_to(sim.leaves_[i]), mode)));
  }
  sim.matrix_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double c = counts_cosine(counts[i], counts[j]);
      sim.matrix_[i * n + j] = c;
      sim.matrix_[j * n + i] = c;
    }
  }
  sim.top_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return sim.matrix_[i * n + x] > sim.matrix_[i * n + y];
    });
    order.resize(std::min(order.size(), top_n));
    for (std::size_t j : order) sim.top_[i].push_back(sim.leaves_[j]);
  }
  return sim;
}

double DescriptionSimilarity::similarity(NodeId leaf_a, NodeId leaf_b) const {
  auto a = slot_.find(leaf_a);
  auto b = slot_.find(leaf_b);
  if (a == slot_.end() || b == slot_.end()) throw NotFoundError("description similarity: not a leaf");
  return matrix_[a->second * leaves_.size() + b->second];
}

const std::vector<NodeId>& DescriptionSimilarity::top(NodeId leaf) const {
  auto it = slot_.find(leaf);
  if (it == slot_.end()) throw NotFoundError("description similarity: not a leaf");
  return top_[it->second];
}

DescriptionSimilarity build_desc_similarity(const Taxonomy& taxonomy, LabelTextMode mode) {
  return DescriptionSimilarity::build(taxonomy, mode);
}

ContrastiveSampler::ContrastiveSampler(const std::vector<Document>& trainset, const Taxonomy& taxonomy,
                                       const DescriptionSimilarity& similarity, LabelTextMode mode, GroupSizes sizes)
    : trainset_(trainset), taxonomy_(taxonomy), similarity_(similarity), sizes_(sizes) {
  if (taxonomy.leaves().size() < 2) throw ConfigError("contrastive sampling needs at least two leaf labels");
  for (std::size_t i = 0; i < trainset.size(); ++i) docs_by_leaf_[trainset[i].gold.leaf()].push_back(i);
  for (NodeId leaf : taxonomy.leaves()) {
    LabelPath path = taxonomy.path_to(leaf);
    GroupMember m;
    m.source = "label:" + taxonomy.qualified_name(leaf);
    m.tokens = tokenize(taxonomy.label_text(path, mode));
    if (m.tokens.empty()) throw FormatError("label text for '" + taxonomy.qualified_name(leaf) + "' has no tokens");
    m.path = std::move(path);
    m.is_label_text = true;
    label_members_.emplace(leaf, std::move(m));
  }
}

GroupMember ContrastiveSampler::doc_member(std::size_t index) const {
  const Document& doc = trainset_[index];
  return GroupMember{doc.id, doc.tokens, doc.gold, false};
}

std::vector<std::size_t> ContrastiveSampler::draw(std::size_t pool_size, std::size_t count, Rng& rng) const {
  if (pool_size == 0) return {};
  if (pool_size >= count) return rng.sample_indices(pool_size, count);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(rng.uniform_index(pool_size));
  return out;
}

ContrastiveGroup ContrastiveSampler::select(std::size_t anchor_index, Rng& rng) const {
  if (anchor_index >= trainset_.size()) throw NotFoundError("anchor index out of range");
  const Document& anchor = trainset_[anchor_index];
  const NodeId leaf = anchor.gold.leaf();

  ContrastiveGroup group;
  group.anchor = doc_member(anchor_index);

  std::vector<std::size_t> same;
  for (std::size_t i : docs_by_leaf_.at(leaf)) {
    if (i != anchor_index) same.push_back(i);
  }
  group.positive = same.empty() ? label_members_.at(leaf) : doc_member(same[rng.uniform_index(same.size())]);

  std::vector<GroupMember> hard_pool;
  for (NodeId other : similarity_.top(leaf)) {
    if (auto it = docs_by_leaf_.find(other); it != docs_by_leaf_.end()) {
      for (std::size_t i : it->second) hard_pool.push_back(doc_member(i));
    }
    hard_pool.push_back(label_members_.at(other));
  }
  for (std::size_t i : draw(hard_pool.size(), sizes_.hard_negatives, rng)) group.hard_negatives.push_back(hard_pool[i]);

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < trainset_.size(); ++i) {
    if (trainset_[i].gold != anchor.gold) others.push_back(i);
  }
  if (!others.empty()) {
    for (std::size_t i : draw(others.size(), sizes_.random_negatives, rng)) {
      group.random_negatives.push_back(doc_member(others[i]));
    }
  } else {
    std::vector<NodeId> other_leaves;
    for (NodeId other : taxonomy_.leaves()) {
      if (other != leaf) other_leaves.push_back(other);
    }
    for (std::size_t i : draw(other_leaves.size(), sizes_.random_negatives, rng)) {
      group.random_negatives.push_back(label_members_.at(other_leaves[i]));
    }
  }
  return group;
}

ContrastiveGroup select_contrastive_group(std::size_t anchor_index, const std::vector<Document>& trainset,
                                          const Taxonomy& taxonomy, const DescriptionSimilarity& similarity,
                                          LabelTextMode mode, Rng& rng) {
  ContrastiveSampler sampler(trainset, taxonomy, similarity, mode);
  return sampler.select(anchor_index, rng);
}

}  // namespace hicl
