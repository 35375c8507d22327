#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hicl/taxonomy.hpp"

namespace hicl {

struct ClassScore {
  NodeId label = kRootId;
  std::size_t support = 0;  // gold occurrences
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct LevelScore {
  int level = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct EvalReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<LevelScore> per_level;
  std::vector<ClassScore> per_class;  // ascending node id
  std::size_t n_docs = 0;
  std::map<std::string, std::string> config;  // echoed into reports

  /// One JSON record per line: summary, per level, per class.
  std::string to_jsonl(const Taxonomy& taxonomy) const;
  std::string to_table(const Taxonomy& taxonomy) const;
};

using PathPair = std::pair<LabelPath, LabelPath>;  // (gold, predicted)

/// Each document contributes the label set of its path. Micro counts TP/FP/FN
/// over label occurrences; macro averages per-class F1 over classes with gold
/// support. Per-level slices restrict both to level-j labels.
EvalReport micro_macro_f1(const std::vector<PathPair>& pairs, const Taxonomy& taxonomy);
EvalReport micro_macro_f1(const std::vector<LabelPath>& golds, const std::vector<LabelPath>& predicted,
                          const Taxonomy& taxonomy);

/// Number of labels shared by two paths.
std::size_t label_overlap(const LabelPath& a, const LabelPath& b);

/// Per document picks the ranked candidate with the largest label overlap
/// with gold (earlier rank on ties) and scores those picks.
EvalReport topk_oracle_f1(const std::vector<LabelPath>& golds, const std::vector<std::vector<LabelPath>>& topk_paths,
                          const Taxonomy& taxonomy);

}  // namespace hicl
