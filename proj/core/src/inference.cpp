#include "hicl/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hicl/io.hpp"
#include "hicl/prompt.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace hicl {

using nlohmann::json;

namespace {

bool passes_through(const LabelPath& path, NodeId node, int level) {
  // level 0 is the root, which every path passes through
  return level == 0 || path.at_level(level) == node;
}

std::string level_name(const Taxonomy& taxonomy, const LabelPath& path, int level) {
  return level == 0 ? std::string(kRootName) : taxonomy.node(path.at_level(level)).name;
}

Demonstration make_demo(const RetrievalDatabase& db, const DocumentStore& store, const ScoredInstance& s) {
  const IndexedInstance& inst = db.at(s.index);
  auto it = store.find(inst.doc_id);
  if (it == store.end()) throw NotFoundError("no text stored for demonstration '" + inst.doc_id + "'");
  return Demonstration{inst.doc_id, it->second, inst.path, s.score};
}

/// Diverse top-k over the part of `ranked` that passes through `current`.
RetrievedDemos demos_from_ranking(const RetrievalDatabase& db, const std::vector<ScoredInstance>& ranked,
                                  const DocumentStore& store, std::size_t k, DiversityKey key,
                                  const Taxonomy* taxonomy, NodeId current, int current_level) {
  std::vector<ScoredInstance> scope;
  if (current_level == 0) {
    scope = ranked;
  } else {
    for (const ScoredInstance& s : ranked) {
      if (passes_through(db.at(s.index).path, current, current_level)) scope.push_back(s);
    }
    if (scope.empty()) scope = ranked;
  }
  RetrievedDemos out;
  for (const ScoredInstance& s : diverse_prefix(db, scope, k, key, taxonomy)) out.demos.push_back(make_demo(db, store, s));
  out.ranked_paths.reserve(ranked.size());
  for (const ScoredInstance& s : ranked) out.ranked_paths.push_back(db.at(s.index).path);
  return out;
}

bool is_word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;
}

bool contains_word(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    bool left_ok = pos == 0 || !is_word_byte(hay[pos - 1]) || !is_word_byte(needle.front());
    std::size_t end = pos + needle.size();
    bool right_ok = end == hay.size() || !is_word_byte(hay[end]) || !is_word_byte(needle.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

LlmRequest make_request(std::string prompt_text, double temperature, LlmPurpose purpose) {
  LlmRequest req;
  req.messages.push_back({"user", std::move(prompt_text)});
  req.temperature = temperature;
  req.purpose = purpose;
  return req;
}

std::string db_fingerprint(const RetrievalDatabase& db) {
  return to_hex(db.encoder_fingerprint()) + "/" + std::to_string(db.size());
}

std::vector<std::string> demo_ids(const std::vector<Demonstration>& demos) {
  std::vector<std::string> out;
  for (const auto& d : demos) out.push_back(d.doc_id);
  return out;
}

InferenceTrace classify_pick_example(std::string_view query_text, const RetrievedDemos& retrieved,
                                     const InferenceConfig& cfg, LlmClient& llm, InferenceTrace trace) {
  trace.mode = "pick-example";
  LevelRecord rec;
  rec.demo_ids = demo_ids(retrieved.demos);
  const auto& demos = retrieved.demos;
  if (!cfg.demos || demos.empty()) {
    // nothing to pick from: the most similar instance is adopted directly
    trace.predicted = retrieved.ranked_paths.front();
    rec.fallback_used = true;
  } else {
    std::vector<std::string> texts;
    for (const auto& d : demos) texts.push_back(d.text);
    for (std::size_t i = 0; i < demos.size(); ++i) rec.candidates.push_back(std::to_string(i + 1));
    LlmRequest req = make_request(prompt::pick_example_prompt(texts, query_text), cfg.temperature,
                                  LlmPurpose::PickExample);
    req.candidates = rec.candidates;
    for (std::size_t i = 0; i < demos.size(); ++i) req.demo_answers.push_back({rec.candidates[i], demos[i].score});
    rec.reply = llm.complete(req);
    rec.llm_called = true;
    ++trace.llm_calls;

    std::optional<std::size_t> picked;
    const std::string& r = rec.reply;
    auto digit = std::find_if(r.begin(), r.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (digit != r.end()) {
      std::size_t value = 0;
      for (auto it = digit; it != r.end() && std::isdigit(static_cast<unsigned char>(*it)) && value < 1000000; ++it) {
        value = value * 10 + static_cast<std::size_t>(*it - '0');
      }
      if (value >= 1 && value <= demos.size()) picked = value - 1;
    }
    if (picked) {
      rec.match = MatchKind::Exact;
      rec.parsed_label = rec.candidates[*picked];
      trace.predicted = demos[*picked].path;
    } else {
      rec.fallback_used = true;
      trace.predicted = retrieved.ranked_paths.front();
    }
  }
  rec.parsed = trace.predicted.leaf();
  trace.levels.push_back(std::move(rec));
  return trace;
}

InferenceTrace classify_path(std::string_view query_text, const Taxonomy& taxonomy, const RetrievedDemos& retrieved,
                             const InferenceConfig& cfg, LlmClient& llm, InferenceTrace trace) {
  trace.mode = "path";
  std::vector<LabelPath> candidates;
  if (cfg.pruning) {
    for (const auto& d : retrieved.demos) {
      if (std::find(candidates.begin(), candidates.end(), d.path) == candidates.end()) candidates.push_back(d.path);
    }
  }
  if (candidates.empty()) candidates = taxonomy.leaf_paths();

  LevelRecord rec;
  rec.demo_ids = demo_ids(retrieved.demos);
  for (const auto& p : candidates) rec.candidates.push_back(taxonomy.qualified_name(p.leaf()));

  std::vector<prompt::DemoBlock> blocks;
  if (cfg.demos) {
    for (const auto& d : retrieved.demos) blocks.push_back({d.text, "", taxonomy.qualified_name(d.path.leaf())});
  }
  LlmRequest req = make_request(prompt::path_prompt(blocks, query_text, rec.candidates), cfg.temperature,
                                LlmPurpose::ClassifyPath);
  req.candidates = rec.candidates;
  for (const auto& b : blocks) req.demo_answers.push_back({b.answer, 0.0});
  if (cfg.demos) {
    for (std::size_t i = 0; i < retrieved.demos.size(); ++i) req.demo_answers[i].score = retrieved.demos[i].score;
  }
  rec.reply = llm.complete(req);
  rec.llm_called = true;
  ++trace.llm_calls;

  LabelMatch m = match_label(rec.reply, rec.candidates);
  rec.match = m.kind;
  if (candidates.size() == 1) {
    rec.forced = true;
    trace.predicted = candidates.front();
  } else if (m.index) {
    trace.predicted = candidates[*m.index];
  } else {
    rec.fallback_used = true;
    trace.predicted = retrieved.ranked_paths.front();
  }
  rec.parsed = trace.predicted.leaf();
  rec.parsed_label = taxonomy.qualified_name(rec.parsed);
  trace.levels.push_back(std::move(rec));
  return trace;
}

}  // namespace

DocumentStore make_document_store(const std::vector<Document>& docs) {
  DocumentStore store;
  for (const Document& d : docs) store.emplace(d.id, d.text);
  return store;
}

FallbackPolicy parse_fallback_policy(std::string_view text) {
  if (text == "top-ranked") return FallbackPolicy::TopRanked;
  if (text == "consistent") return FallbackPolicy::Consistent;
  throw ConfigError("unknown fallback policy '" + std::string(text) + "' (expected top-ranked | consistent)");
}

std::string_view to_string(FallbackPolicy policy) {
  return policy == FallbackPolicy::TopRanked ? "top-ranked" : "consistent";
}

std::string_view to_string(MatchKind kind) {
  switch (kind) {
    case MatchKind::Exact: return "exact";
    case MatchKind::CaseInsensitive: return "case-insensitive";
    case MatchKind::Contained: return "contained";
    case MatchKind::None: return "none";
  }
  return "?";
}

void InferenceConfig::validate() const {
  if (k < 1) throw ConfigError("inference: k must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("inference: temperature must be >= 0");
}

RetrievedDemos retrieve_demos(std::span<const float> query, const RetrievalDatabase& db, const DocumentStore& store,
                              std::size_t k, DiversityKey key, const Taxonomy* taxonomy) {
  if (k == 0) throw ConfigError("search: k must be >= 1");
  if (db.empty()) throw ConfigError("search: retrieval database is empty");
  return demos_from_ranking(db, rank_all(db, query), store, k, key, taxonomy, kRootId, 0);
}

std::vector<NodeId> candidate_label_set(const Taxonomy& taxonomy, NodeId current,
                                        const std::vector<Demonstration>& demos, int level,
                                        const InferenceConfig& cfg) {
  auto children = taxonomy.children_of(current);
  if (children.empty()) throw ConfigError("candidate set: '" + taxonomy.qualified_name(current) + "' is a leaf");
  if (taxonomy.node(current).level != level - 1) throw ConfigError("candidate set: current label is not at level j-1");
  if (!cfg.candidate_set) return {};
  std::vector<NodeId> out;
  if (cfg.pruning) {
    for (const Demonstration& d : demos) {
      NodeId label = d.path.at_level(level);
      if (std::find(children.begin(), children.end(), label) != children.end() &&
          std::find(out.begin(), out.end(), label) == out.end()) {
        out.push_back(label);
      }
    }
  }
  if (out.empty()) out.assign(children.begin(), children.end());
  return out;
}

std::string assemble_prompt_level(const Taxonomy& taxonomy, std::string_view query_text, NodeId current,
                                  const std::vector<Demonstration>& demos, const std::vector<NodeId>& candidates,
                                  int level) {
  std::vector<prompt::DemoBlock> blocks;
  for (const Demonstration& d : demos) {
    blocks.push_back({d.text, level_name(taxonomy, d.path, level - 1), level_name(taxonomy, d.path, level)});
  }
  std::vector<std::string> names;
  for (NodeId c : candidates) names.push_back(taxonomy.node(c).name);
  const std::string current_name = current == kRootId ? std::string(kRootName) : taxonomy.node(current).name;
  return prompt::level_prompt(blocks, query_text, current_name, names);
}

LabelMatch match_label(std::string_view reply, const std::vector<std::string>& candidates) {
  const std::string_view trimmed = detail::trim(reply);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (trimmed == candidates[i]) return {i, MatchKind::Exact};
  }
  const std::string lower = detail::to_lower_ascii(trimmed);
  std::optional<std::size_t> hit;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (lower == detail::to_lower_ascii(detail::trim(candidates[i]))) {
      hit = i;
      ++hits;
    }
  }
  if (hits == 1) return {hit, MatchKind::CaseInsensitive};
  if (hits > 1) return {};

  const std::string hay = detail::normalize_ws_lower(reply);
  hits = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (contains_word(hay, detail::normalize_ws_lower(candidates[i]))) {
      hit = i;
      ++hits;
    }
  }
  if (hits == 1) return {hit, MatchKind::Contained};
  return {};
}

LevelDecision parse_llm_label(std::string_view reply, const std::vector<NodeId>& candidates, const Taxonomy& taxonomy,
                              NodeId current, int level, const RetrievedDemos& retrieved, FallbackPolicy policy) {
  std::vector<std::string> names;
  for (NodeId c : candidates) names.push_back(taxonomy.node(c).name);
  LabelMatch m = match_label(reply, names);
  if (m.index) return LevelDecision{candidates[*m.index], false, m.kind, std::nullopt};

  LevelDecision d;
  d.fallback_used = true;
  if (policy == FallbackPolicy::Consistent) {
    for (const Demonstration& demo : retrieved.demos) {
      if (passes_through(demo.path, current, level - 1)) {
        d.label = demo.path.at_level(level);
        return d;
      }
    }
  }
  if (retrieved.ranked_paths.empty()) throw ConfigError("fallback: retrieval ranking is empty");
  const LabelPath& top = retrieved.ranked_paths.front();
  const NodeId label = top.at_level(level);
  if (taxonomy.node(label).parent == current) {
    d.label = label;
    return d;
  }
  // the top instance sits under another branch: continue along the most
  // similar instance under `current`, or give up and take the top path
  for (const LabelPath& p : retrieved.ranked_paths) {
    if (passes_through(p, current, level - 1)) {
      d.label = p.at_level(level);
      d.adopted_path = p;
      return d;
    }
  }
  d.label = top.at_level(level);
  d.adopted_path = top;
  return d;
}

std::string InferenceTrace::to_json(const Taxonomy& taxonomy) const {
  json doc;
  doc["mode"] = mode;
  doc["template_hash"] = template_hash;
  doc["db_fingerprint"] = db_fingerprint;
  doc["llm_calls"] = llm_calls;
  doc["adopted_whole_path"] = adopted_whole_path;
  doc["predicted"] = taxonomy.names_of(predicted);
  doc["demos"] = json::array();
  for (const Demonstration& d : demos) {
    doc["demos"].push_back({{"doc_id", d.doc_id}, {"text", d.text}, {"path", taxonomy.names_of(d.path)}, {"score", d.score}});
  }
  doc["levels"] = json::array();
  for (const LevelRecord& r : levels) {
    doc["levels"].push_back({{"level", r.level},
                             {"current", r.current == kRootId ? std::string(kRootName) : taxonomy.node(r.current).name},
                             {"demo_ids", r.demo_ids},
                             {"candidates", r.candidates},
                             {"llm_called", r.llm_called},
                             {"reply", r.reply},
                             {"parsed", r.parsed_label},
                             {"match", std::string(to_string(r.match))},
                             {"fallback_used", r.fallback_used},
                             {"forced", r.forced}});
  }
  return doc.dump();
}

std::vector<float> encode_query(std::string_view text, const EncoderParams& params) {
  auto tokens = tokenize(text);
  if (tokens.empty()) throw ConfigError("query text has no tokens");
  return index_vectors(encode(tokens, params));
}

InferenceTrace classify_iterative(std::string_view query_text, const RetrievalDatabase& db,
                                  const EncoderParams& params, const Taxonomy& taxonomy, const DocumentStore& store,
                                  const InferenceConfig& cfg, LlmClient& llm) {
  return classify_iterative(query_text, encode_query(query_text, params), db, taxonomy, store, cfg, llm);
}

InferenceTrace classify_iterative(std::string_view query_text, std::span<const float> query_vectors,
                                  const RetrievalDatabase& db, const Taxonomy& taxonomy, const DocumentStore& store,
                                  const InferenceConfig& cfg, LlmClient& llm) {
  cfg.validate();
  if (taxonomy.depth() < 1) throw ConfigError("classify: empty taxonomy");
  if (db.empty()) throw ConfigError("classify: retrieval database is empty");
  if (db.depth() != taxonomy.depth()) throw ConfigError("classify: database depth does not match taxonomy");

  const auto ranked = rank_all(db, query_vectors);
  const RetrievedDemos retrieved = demos_from_ranking(db, ranked, store, cfg.k, cfg.diversity, &taxonomy, kRootId, 0);

  InferenceTrace trace;
  trace.template_hash = prompt::template_hash();
  trace.db_fingerprint = db_fingerprint(db);
  trace.demos = retrieved.demos;

  if (!cfg.candidate_set) return classify_pick_example(query_text, retrieved, cfg, llm, std::move(trace));
  if (!cfg.iterative) return classify_path(query_text, taxonomy, retrieved, cfg, llm, std::move(trace));

  trace.mode = "iterative";
  NodeId current = kRootId;
  for (int level = 1; level <= taxonomy.depth(); ++level) {
    RetrievedDemos scoped;
    if (cfg.per_level_retrieval && level > 1) {
      scoped = demos_from_ranking(db, ranked, store, cfg.k, cfg.diversity, &taxonomy, current, level - 1);
    }
    const RetrievedDemos& r = cfg.per_level_retrieval && level > 1 ? scoped : retrieved;

    LevelRecord rec;
    rec.level = level;
    rec.current = current;
    rec.demo_ids = demo_ids(r.demos);
    const auto cands = candidate_label_set(taxonomy, current, r.demos, level, cfg);
    for (NodeId c : cands) rec.candidates.push_back(taxonomy.node(c).name);

    std::vector<Demonstration> shown = cfg.demos ? r.demos : std::vector<Demonstration>{};
    LlmRequest req = make_request(assemble_prompt_level(taxonomy, query_text, current, shown, cands, level),
                                  cfg.temperature, LlmPurpose::ClassifyLevel);
    req.candidates = rec.candidates;
    for (const Demonstration& d : shown) req.demo_answers.push_back({level_name(taxonomy, d.path, level), d.score});
    rec.reply = llm.complete(req);
    rec.llm_called = true;
    ++trace.llm_calls;

    LevelDecision decision;
    if (cands.size() == 1) {
      decision.label = cands.front();
      decision.match = match_label(rec.reply, rec.candidates).kind;
      rec.forced = true;
    } else {
      decision = parse_llm_label(rec.reply, cands, taxonomy, current, level, r, cfg.fallback);
    }
    rec.parsed = decision.label;
    rec.parsed_label = taxonomy.node(decision.label).name;
    rec.fallback_used = decision.fallback_used;
    rec.match = decision.match;
    trace.levels.push_back(std::move(rec));

    if (decision.adopted_path) {
      const LabelPath& adopted = *decision.adopted_path;
      if (level > 1 && !passes_through(adopted, current, level - 1)) {
        trace.predicted = adopted;
        trace.adopted_whole_path = true;
      } else {
        trace.predicted.nodes.assign(adopted.nodes.begin(), adopted.nodes.end());
      }
      break;
    }
    trace.predicted.nodes.push_back(decision.label);
    current = decision.label;
  }
  return trace;
}

LabelPath classify_retrieval_only(std::span<const float> query_vectors, const RetrievalDatabase& db) {
  if (db.empty()) throw ConfigError("classify: retrieval database is empty");
  std::size_t best = 0;
  double best_score = similarity(query_vectors, db.at(0).vectors, db.depth(), db.dim());
  for (std::size_t i = 1; i < db.size(); ++i) {
    double s = similarity(query_vectors, db.at(i).vectors, db.depth(), db.dim());
    // ordinals increase with position, so strict > keeps the lower one on ties
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return db.at(best).path;
}

LabelPath classify_retrieval_only(std::string_view query_text, const RetrievalDatabase& db,
                                  const EncoderParams& params) {
  return classify_retrieval_only(encode_query(query_text, params), db);
}

std::string generate_label_description(Taxonomy& taxonomy, const LabelPath& path, LlmClient& llm, double temperature,
                                       bool force) {
  taxonomy.validate_path(path);
  const LabelNode& leaf = taxonomy.node(path.leaf());
  if (leaf.description && !force) return *leaf.description;
  LlmRequest req = make_request(prompt::describe_prompt(taxonomy.path_text(path)), temperature, LlmPurpose::Describe);
  std::string reply(detail::trim(llm.complete(req)));
  if (reply.empty()) {
    throw LlmError(LlmError::Kind::EmptyReply, "empty description for '" + taxonomy.qualified_name(path.leaf()) + "'");
  }
  taxonomy.set_description(path.leaf(), reply);
  return reply;
}

std::size_t describe_all_leaves(Taxonomy& taxonomy, LlmClient& llm, double temperature, bool force) {
  std::size_t calls = 0;
  for (const LabelPath& p : taxonomy.leaf_paths()) {
    if (force || !taxonomy.node(p.leaf()).description) ++calls;
    generate_label_description(taxonomy, p, llm, temperature, force);
  }
  return calls;
}

}  // namespace hicl
