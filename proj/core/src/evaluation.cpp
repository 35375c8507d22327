#include "hicl/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "hicl/error.hpp"
#include "json.hpp"

namespace hicl {

using nlohmann::json;

namespace {

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, support = 0;
};

/// Micro and macro over the labels whose level passes `keep`.
template <typename Keep>
std::pair<double, double> slice_scores(const std::map<NodeId, Counts>& counts, const Taxonomy& taxonomy, Keep keep) {
  std::size_t tp = 0, fp = 0, fn = 0;
  double macro_sum = 0.0;
  std::size_t macro_n = 0;
  for (const auto& [label, c] : counts) {
    if (!keep(taxonomy.node(label).level)) continue;
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    if (c.support > 0) {
      macro_sum += f1_of(c.tp, c.fp, c.fn);
      ++macro_n;
    }
  }
  return {f1_of(tp, fp, fn), macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n)};
}

}  // namespace

EvalReport micro_macro_f1(const std::vector<PathPair>& pairs, const Taxonomy& taxonomy) {
  if (pairs.empty()) throw ConfigError("evaluation: no documents");
  std::map<NodeId, Counts> counts;
  for (const auto& [gold, pred] : pairs) {
    taxonomy.validate_path(gold);
    taxonomy.validate_path(pred);
    const std::set<NodeId> g(gold.nodes.begin(), gold.nodes.end());
    const std::set<NodeId> p(pred.nodes.begin(), pred.nodes.end());
    for (NodeId x : g) {
      ++counts[x].support;
      if (p.count(x)) {
        ++counts[x].tp;
      } else {
        ++counts[x].fn;
      }
    }
    for (NodeId x : p) {
      if (!g.count(x)) ++counts[x].fp;
    }
  }

  EvalReport report;
  report.n_docs = pairs.size();
  for (const auto& [label, c] : counts) {
    report.tp += c.tp;
    report.fp += c.fp;
    report.fn += c.fn;
    ClassScore s;
    s.label = label;
    s.support = c.support;
    s.tp = c.tp;
    s.fp = c.fp;
    s.fn = c.fn;
    s.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    s.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    s.f1 = f1_of(c.tp, c.fp, c.fn);
    report.per_class.push_back(s);
  }
  std::tie(report.micro_f1, report.macro_f1) = slice_scores(counts, taxonomy, [](int) { return true; });
  for (int j = 1; j <= taxonomy.depth(); ++j) {
    auto [mi, ma] = slice_scores(counts, taxonomy, [j](int level) { return level == j; });
    report.per_level.push_back({j, mi, ma});
  }
  return report;
}

EvalReport micro_macro_f1(const std::vector<LabelPath>& golds, const std::vector<LabelPath>& predicted,
                          const Taxonomy& taxonomy) {
  if (golds.size() != predicted.size()) {
    throw ConfigError("evaluation: " + std::to_string(golds.size()) + " gold paths but " +
                      std::to_string(predicted.size()) + " predictions");
  }
  std::vector<PathPair> pairs;
  pairs.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) pairs.emplace_back(golds[i], predicted[i]);
  return micro_macro_f1(pairs, taxonomy);
}

std::size_t label_overlap(const LabelPath& a, const LabelPath& b) {
  std::set<NodeId> sa(a.nodes.begin(), a.nodes.end());
  std::size_t n = 0;
  for (NodeId x : std::set<NodeId>(b.nodes.begin(), b.nodes.end())) n += sa.count(x);
  return n;
}

EvalReport topk_oracle_f1(const std::vector<LabelPath>& golds, const std::vector<std::vector<LabelPath>>& topk_paths,
                          const Taxonomy& taxonomy) {
  if (golds.size() != topk_paths.size()) throw ConfigError("evaluation: gold and top-k lists differ in length");
  std::vector<LabelPath> picks;
  picks.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& cands = topk_paths[i];
    if (cands.empty()) throw ConfigError("evaluation: document " + std::to_string(i + 1) + " has no candidate paths");
    std::size_t best = 0;
    std::size_t best_overlap = label_overlap(golds[i], cands[0]);
    for (std::size_t r = 1; r < cands.size(); ++r) {
      std::size_t o = label_overlap(golds[i], cands[r]);
      if (o > best_overlap) {
        best_overlap = o;
        best = r;
      }
    }
    picks.push_back(cands[best]);
  }
  return micro_macro_f1(golds, picks, taxonomy);
}

std::string EvalReport::to_jsonl(const Taxonomy& taxonomy) const {
  std::string out;
  json summary = {{"record", "summary"}, {"n_docs", n_docs}, {"micro_f1", micro_f1}, {"macro_f1", macro_f1},
                  {"tp", tp},           {"fp", fp},         {"fn", fn}};
  summary["config"] = config;
  out += summary.dump() + "\n";
  for (const LevelScore& l : per_level) {
    out += json{{"record", "level"}, {"level", l.level}, {"micro_f1", l.micro_f1}, {"macro_f1", l.macro_f1}}.dump() +
           "\n";
  }
  for (const ClassScore& c : per_class) {
    out += json{{"record", "class"},        {"label", taxonomy.qualified_name(c.label)},
                {"level", taxonomy.node(c.label).level},
                {"support", c.support},     {"tp", c.tp},
                {"fp", c.fp},               {"fn", c.fn},
                {"precision", c.precision}, {"recall", c.recall},
                {"f1", c.f1}}
               .dump() +
           "\n";
  }
  return out;
}

std::string EvalReport::to_table(const Taxonomy& taxonomy) const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "documents: %zu\nmicro-F1: %.4f  macro-F1: %.4f\n\n", n_docs, micro_f1, macro_f1);
  os << buf;
  os << "level  micro-F1  macro-F1\n";
  for (const LevelScore& l : per_level) {
    std::snprintf(buf, sizeof buf, "%5d  %8.4f  %8.4f\n", l.level, l.micro_f1, l.macro_f1);
    os << buf;
  }
  os << "\nlabel                                     support  prec    rec     F1\n";
  for (const ClassScore& c : per_class) {
    std::snprintf(buf, sizeof buf, "%-40.40s  %7zu  %.4f  %.4f  %.4f\n", taxonomy.qualified_name(c.label).c_str(),
                  c.support, c.precision, c.recall, c.f1);
    os << buf;
  }
  if (!config.empty()) {
    os << "\nconfig:\n";
    for (const auto& [k, v] : config) os << "  " << k << " = " << v << '\n';
  }
  return os.str();
}

}  // namespace hicl
