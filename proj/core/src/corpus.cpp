#include "hicl/corpus.hpp"

#include <algorithm>
#include <unordered_map>

#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "hicl/rng.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace hicl {

using nlohmann::json;

SamplingMode parse_sampling_mode(std::string_view text) {
  if (text == "balanced") return SamplingMode::Balanced;
  if (text == "imbalanced") return SamplingMode::Imbalanced;
  throw ConfigError("unknown sampling mode '" + std::string(text) + "' (expected balanced|imbalanced)");
}

std::vector<Document> parse_corpus(std::string_view text, const Taxonomy& taxonomy) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fail = [&](const std::string& msg) -> FormatError {
      return FormatError("corpus line " + std::to_string(line_no) + ": " + msg);
    };
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) throw fail("record is not an object");
    if (!rec.contains("text") || !rec["text"].is_string()) throw fail("missing string field 'text'");
    if (!rec.contains("labels") || !rec["labels"].is_array()) throw fail("missing array field 'labels'");

    Document doc;
    if (rec.contains("id")) {
      doc.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    } else {
      doc.id = std::to_string(line_no);
    }
    doc.text = rec["text"].get<std::string>();
    doc.tokens = tokenize(doc.text);
    if (doc.tokens.empty()) throw fail("empty text");

    std::vector<std::string> names;
    for (const auto& l : rec["labels"]) {
      if (!l.is_string()) throw fail("labels must be strings");
      names.push_back(l.get<std::string>());
    }
    if (names.size() != static_cast<std::size_t>(taxonomy.depth())) {
      throw fail("label path length " + std::to_string(names.size()) + " != taxonomy depth " +
                 std::to_string(taxonomy.depth()));
    }
    auto path = taxonomy.resolve_names(names);
    if (!path) {
      std::string joined;
      for (const auto& n : names) joined += (joined.empty() ? "" : "/") + n;
      throw fail("label path '" + joined + "' does not resolve in the taxonomy");
    }
    doc.gold = std::move(*path);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& file, const Taxonomy& taxonomy) {
  return parse_corpus(read_text_file(file), taxonomy);
}

std::string serialize_document(const Document& doc, const Taxonomy& taxonomy) {
  json rec;
  rec["id"] = doc.id;
  rec["text"] = doc.text;
  rec["labels"] = taxonomy.names_of(doc.gold);
  return rec.dump();
}

void save_corpus(const std::filesystem::path& file, const std::vector<Document>& docs, const Taxonomy& taxonomy) {
  std::string out;
  for (const Document& d : docs) {
    out += serialize_document(d, taxonomy);
    out += '\n';
  }
  write_file_atomic(file, out);
}

namespace {

/// Groups document indices by full label path, in first-occurrence order.
std::vector<std::vector<std::size_t>> group_by_path(const std::vector<Document>& corpus) {
  std::unordered_map<LabelPath, std::size_t, LabelPathHash> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = slot.emplace(corpus[i].gold, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

void take(const std::vector<Document>& corpus, const std::vector<std::size_t>& group, std::size_t n, Rng& rng,
          std::vector<Document>& out) {
  std::vector<std::size_t> picked;
  if (n >= group.size()) {
    picked = group;
  } else {
    for (std::size_t i : rng.sample_indices(group.size(), n)) picked.push_back(group[i]);
    std::sort(picked.begin(), picked.end());
  }
  for (std::size_t i : picked) out.push_back(corpus[i]);
}

}  // namespace

std::vector<Document> sample_few_shot(const std::vector<Document>& corpus, const FewShotConfig& cfg) {
  if (corpus.empty()) throw ConfigError("cannot sample from an empty corpus");
  Rng rng(cfg.seed);
  std::vector<Document> out;
  for (const auto& group : group_by_path(corpus)) take(corpus, group, std::min(group.size(), cfg.q), rng, out);
  return out;
}

std::vector<Document> sample_imbalanced(const std::vector<Document>& corpus, const FewShotConfig& cfg) {
  if (corpus.empty()) throw ConfigError("cannot sample from an empty corpus");
  Rng rng(cfg.seed);
  std::vector<Document> out;
  for (const auto& group : group_by_path(corpus)) {
    auto upper = static_cast<std::int64_t>(std::min(group.size(), cfg.q));
    auto n = static_cast<std::size_t>(rng.uniform_int(0, upper));
    take(corpus, group, n, rng, out);
  }
  return out;
}

std::vector<Document> sample(const std::vector<Document>& corpus, const FewShotConfig& cfg) {
  return cfg.mode == SamplingMode::Balanced ? sample_few_shot(corpus, cfg) : sample_imbalanced(corpus, cfg);
}

}  // namespace hicl
