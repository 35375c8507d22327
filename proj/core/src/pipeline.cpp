#include "hicl/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "hicl/annotation_service.hpp"
#include "hicl/error.hpp"
#include "hicl/evaluation.hpp"
#include "hicl/io.hpp"
#include "hicl/llm_client.hpp"
#include "hicl/prompt.hpp"
#include "hicl/retrieval.hpp"
#include "hicl/rng.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace hicl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string make_word(Rng& rng) {
  std::string w;
  for (int s = 0; s < 3; ++s) {
    w += kConsonants[rng.uniform_index(kConsonants.size())];
    w += kVowels[rng.uniform_index(kVowels.size())];
  }
  return w;
}

/// Fresh words whose tokens collide with nothing drawn so far.
std::vector<std::string> fresh_words(std::size_t n, Rng& rng, std::set<TokenId>& used) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = make_word(rng);
    TokenId t = hash_token(w);
    if (used.insert(t).second) out.push_back(std::move(w));
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += sep;
    out += w;
  }
  return out;
}

std::string node_code(const std::vector<int>& digits) {
  std::string code;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i % 2 == 0) {
      code += static_cast<char>('A' + digits[i]);
    } else {
      code += std::to_string(digits[i] + 1);
    }
  }
  return code;
}

std::string level_prefix(int level) {
  static const char* kPrefixes[] = {"Domain", "Area", "Topic", "Subtopic", "Facet", "Aspect"};
  return level <= 6 ? kPrefixes[level - 1] : "Level" + std::to_string(level);
}

fs::path or_default(const fs::path& p, const RunConfig& cfg, std::string_view name) {
  return p.empty() ? cfg.output_dir / name : p;
}

void require_file(const fs::path& p, std::string_view what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " file not found: " + p.string());
}

/// Records one command in output_dir/manifest.json.
class Manifest {
 public:
  Manifest(const RunConfig& cfg, std::string_view command) : cfg_(cfg), command_(command) {}

  void input(const fs::path& p) { inputs_[p.filename().string()] = file_fingerprint(p); }
  void output(const fs::path& p) { outputs_[p.filename().string()] = file_fingerprint(p); }
  void seed(std::string_view name, std::uint64_t value) { seeds_[std::string(name)] = value; }
  void setting(std::string_view name, json value) { settings_[std::string(name)] = std::move(value); }

  void write() const {
    fs::path file = cfg_.output_dir / "manifest.json";
    json doc = json::object();
    if (fs::exists(file)) {
      doc = json::parse(read_text_file(file), nullptr, false);
      if (doc.is_discarded() || !doc.is_object()) doc = json::object();
    }
    doc["version"] = std::string(kVersion);
    doc["template_version"] = std::string(prompt::kTemplateVersion);
    doc["template_hash"] = prompt::template_hash();
    doc["commands"][command_] = {{"inputs", inputs_}, {"outputs", outputs_}, {"seeds", seeds_}, {"settings", settings_}};
    write_file_atomic(file, doc.dump(2) + "\n");
  }

 private:
  const RunConfig& cfg_;
  std::string command_;
  json inputs_ = json::object(), outputs_ = json::object(), seeds_ = json::object(), settings_ = json::object();
};

std::unique_ptr<LlmClient> build_llm(const RunConfig& cfg) {
  std::unique_ptr<LlmClient> llm = make_llm_client(cfg.llm);
  if (!cfg.llm_log.empty()) llm = std::make_unique<AuditedClient>(std::move(llm), cfg.llm_log);
  return std::make_unique<BoundedClient>(std::move(llm), static_cast<std::ptrdiff_t>(cfg.max_in_flight));
}

json inference_settings(const InferenceConfig& c) {
  return {{"k", c.k},
          {"temperature", c.temperature},
          {"iterative", c.iterative},
          {"demos", c.demos},
          {"pruning", c.pruning},
          {"candidate_set", c.candidate_set},
          {"fallback", std::string(to_string(c.fallback))},
          {"per_level_retrieval", c.per_level_retrieval},
          {"diversity", c.diversity == DiversityKey::FullPath ? "full-path" : "leaf-name"}};
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SyntheticFixture fx = make_synthetic_fixture(cfg.synth);
  fs::create_directories(cfg.output_dir);
  const fs::path tax = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  const fs::path corpus = or_default(cfg.corpus, cfg, "corpus.jsonl");
  fx.taxonomy.save(tax);
  save_corpus(corpus, fx.corpus, fx.taxonomy);
  Manifest m(cfg, "synth");
  m.seed("synth", cfg.synth.seed);
  m.setting("docs_per_leaf", cfg.synth.docs_per_leaf);
  m.output(tax);
  m.output(corpus);
  m.write();
  out << "wrote " << fx.taxonomy.leaves().size() << " leaves, " << fx.corpus.size() << " documents\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg, std::ostream& out) {
  const fs::path tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  const fs::path corpus_file = or_default(cfg.corpus, cfg, "corpus.jsonl");
  require_file(tax_file, "taxonomy");
  require_file(corpus_file, "corpus");
  Taxonomy tax = Taxonomy::load(tax_file);
  auto corpus = load_corpus(corpus_file, tax);
  CorpusSplit split = split_few_shot(corpus, cfg.few_shot);
  fs::create_directories(cfg.output_dir);
  const fs::path train = or_default(cfg.train, cfg, "train.jsonl");
  const fs::path heldout = or_default(cfg.heldout, cfg, "heldout.jsonl");
  save_corpus(train, split.train, tax);
  save_corpus(heldout, split.heldout, tax);
  Manifest m(cfg, "sample");
  m.input(tax_file);
  m.input(corpus_file);
  m.seed("sample", cfg.few_shot.seed);
  m.setting("q", cfg.few_shot.q);
  m.setting("mode", cfg.few_shot.mode == SamplingMode::Balanced ? "balanced" : "imbalanced");
  m.output(train);
  m.output(heldout);
  m.write();
  out << "sampled " << split.train.size() << " training documents, " << split.heldout.size() << " held out\n";
  return 0;
}

int cmd_describe(const RunConfig& cfg, std::ostream& out) {
  const fs::path tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  require_file(tax_file, "taxonomy");
  Taxonomy tax = Taxonomy::load(tax_file);
  auto llm = build_llm(cfg);
  std::size_t calls = describe_all_leaves(tax, *llm, cfg.inference.temperature, cfg.force_describe);
  fs::create_directories(cfg.output_dir);
  const fs::path out_file = cfg.output_dir / "taxonomy.tsv";
  tax.save(out_file);
  Manifest m(cfg, "describe-labels");
  m.input(tax_file);
  m.setting("llm", cfg.llm);
  m.output(out_file);
  m.write();
  out << "described " << tax.leaves().size() << " leaves with " << calls << " LLM calls\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  const fs::path train_file = or_default(cfg.train, cfg, "train.jsonl");
  require_file(tax_file, "taxonomy");
  require_file(train_file, "training corpus");
  Taxonomy tax = Taxonomy::load(tax_file);
  auto train = load_corpus(train_file, tax);
  auto start = std::chrono::steady_clock::now();
  TrainResult result = train_indexer(train, tax, cfg.train_cfg, [&](const EpochStats& s) {
    err << "epoch " << s.epoch << " loss " << s.mean_total << " (mlm " << s.mean_mlm << ", cls " << s.mean_cls
        << ", con " << s.mean_con << ")\n";
  });
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::create_directories(cfg.output_dir);
  const fs::path params = or_default(cfg.params, cfg, "params.bin");
  save_params(params, result.params);
  Manifest m(cfg, "train-indexer");
  m.input(tax_file);
  m.input(train_file);
  m.seed("train", cfg.train_cfg.seed);
  const TrainConfig& t = cfg.train_cfg;
  m.setting("train", {{"lr", t.lr},
                      {"epochs", t.epochs},
                      {"alpha", t.alpha},
                      {"beta", t.beta},
                      {"tau", t.tau},
                      {"infonce_denominator", t.infonce_denominator},
                      {"mask_rate", t.mask_rate},
                      {"dim", t.dim},
                      {"label_text", std::string(to_string(t.label_text_mode))}});
  m.output(params);
  m.write();
  out << "trained on " << train.size() << " documents in " << secs << " s; params fingerprint "
      << to_hex(params_fingerprint(result.params)) << "\n";
  return 0;
}

int cmd_build_db(const RunConfig& cfg, std::ostream& out) {
  const fs::path tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  const fs::path train_file = or_default(cfg.train, cfg, "train.jsonl");
  const fs::path params_file = or_default(cfg.params, cfg, "params.bin");
  require_file(tax_file, "taxonomy");
  require_file(train_file, "training corpus");
  require_file(params_file, "params");
  Taxonomy tax = Taxonomy::load(tax_file);
  auto train = load_corpus(train_file, tax);
  EncoderParams params = load_params(params_file);
  RetrievalDatabase db = build_database(train, params, tax);
  fs::create_directories(cfg.output_dir);
  const fs::path db_file = or_default(cfg.db, cfg, "db.bin");
  save_db(db_file, db);
  Manifest m(cfg, "build-db");
  m.input(tax_file);
  m.input(train_file);
  m.input(params_file);
  m.output(db_file);
  m.write();
  out << "indexed " << db.size() << " documents\n";
  return 0;
}

struct LoadedModel {
  Taxonomy taxonomy;
  std::vector<Document> train;
  EncoderParams params;
  RetrievalDatabase db;
  fs::path tax_file, train_file, params_file, db_file;
};

LoadedModel load_model(const RunConfig& cfg) {
  LoadedModel m;
  m.tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  m.train_file = or_default(cfg.train, cfg, "train.jsonl");
  m.params_file = or_default(cfg.params, cfg, "params.bin");
  m.db_file = or_default(cfg.db, cfg, "db.bin");
  require_file(m.tax_file, "taxonomy");
  require_file(m.train_file, "training corpus");
  require_file(m.params_file, "params");
  require_file(m.db_file, "database");
  m.taxonomy = Taxonomy::load(m.tax_file);
  m.train = load_corpus(m.train_file, m.taxonomy);
  m.params = load_params(m.params_file);
  m.db = load_db(m.db_file, &m.taxonomy);
  check_fingerprint(m.db, params_fingerprint(m.params), FingerprintPolicy::Fail);
  return m;
}

int cmd_search(const RunConfig& cfg, std::ostream& out) {
  if (cfg.text.empty()) throw ConfigError("search needs --text");
  LoadedModel m = load_model(cfg);
  auto store = make_document_store(m.train);
  auto retrieved = retrieve_demos(encode_query(cfg.text, m.params), m.db, store, cfg.inference.k,
                                  cfg.inference.diversity, &m.taxonomy);
  json demos = json::array();
  for (const Demonstration& d : retrieved.demos) {
    demos.push_back({{"doc_id", d.doc_id}, {"path", m.taxonomy.names_of(d.path)}, {"score", d.score}, {"text", d.text}});
  }
  out << demos.dump(2) << "\n";
  return 0;
}

int cmd_classify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  LoadedModel m = load_model(cfg);
  auto store = make_document_store(m.train);
  std::unique_ptr<LlmClient> llm = cfg.retrieval_only ? nullptr : build_llm(cfg);

  if (!cfg.text.empty()) {
    if (cfg.retrieval_only) {
      out << json(m.taxonomy.names_of(classify_retrieval_only(cfg.text, m.db, m.params))).dump() << "\n";
    } else {
      out << classify_iterative(cfg.text, m.db, m.params, m.taxonomy, store, cfg.inference, *llm).to_json(m.taxonomy)
          << "\n";
    }
    return 0;
  }

  const fs::path input = or_default(cfg.heldout, cfg, "heldout.jsonl");
  require_file(input, "input corpus");
  auto docs = load_corpus(input, m.taxonomy);
  std::string lines;
  std::size_t fallbacks = 0;
  for (const Document& doc : docs) {
    auto query = encode_query(doc.text, m.params);
    json rec = {{"id", doc.id}};
    if (cfg.retrieval_only) {
      rec["labels"] = m.taxonomy.names_of(classify_retrieval_only(query, m.db));
    } else {
      InferenceTrace trace = classify_iterative(doc.text, query, m.db, m.taxonomy, store, cfg.inference, *llm);
      for (const auto& l : trace.levels) fallbacks += l.fallback_used ? 1 : 0;
      rec["labels"] = m.taxonomy.names_of(trace.predicted);
      if (cfg.save_trace) rec["trace"] = json::parse(trace.to_json(m.taxonomy));
    }
    if (cfg.record_topk > 0) {
      json topk = json::array();
      for (const ScoredInstance& s : search_topk_diverse(m.db, query, cfg.record_topk, cfg.inference.diversity,
                                                         &m.taxonomy)) {
        topk.push_back(m.taxonomy.names_of(m.db.at(s.index).path));
      }
      rec["topk"] = topk;
    }
    lines += rec.dump() + "\n";
  }
  fs::create_directories(cfg.output_dir);
  const fs::path pred = or_default(cfg.predictions, cfg, "predictions.jsonl");
  write_file_atomic(pred, lines);

  Manifest man(cfg, "classify");
  man.input(m.tax_file);
  man.input(m.train_file);
  man.input(m.params_file);
  man.input(m.db_file);
  man.input(input);
  man.setting("llm", cfg.retrieval_only ? std::string("none") : cfg.llm);
  man.setting("inference", inference_settings(cfg.inference));
  man.output(pred);
  man.write();
  err << "fallbacks: " << fallbacks << "\n";
  out << "classified " << docs.size() << " documents\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const fs::path tax_file = or_default(cfg.taxonomy, cfg, "taxonomy.tsv");
  const fs::path gold_file = or_default(cfg.heldout, cfg, "heldout.jsonl");
  const fs::path pred_file = or_default(cfg.predictions, cfg, "predictions.jsonl");
  require_file(tax_file, "taxonomy");
  require_file(gold_file, "gold corpus");
  require_file(pred_file, "predictions");
  Taxonomy tax = Taxonomy::load(tax_file);
  auto gold_docs = load_corpus(gold_file, tax);

  std::map<std::string, LabelPath> predicted;
  std::map<std::string, std::vector<LabelPath>> topk;
  std::size_t line_no = 0;
  const std::string content = read_text_file(pred_file);
  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = pred_file.string() + " line " + std::to_string(line_no);
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
        !rec.contains("labels") || !rec["labels"].is_array()) {
      throw FormatError(where + ": expected {\"id\": string, \"labels\": [...]}");
    }
    auto to_path = [&](const json& names) {
      std::vector<std::string> parts;
      for (const json& n : names) {
        if (!n.is_string()) throw FormatError(where + ": labels must be strings");
        parts.push_back(n.get<std::string>());
      }
      auto p = tax.resolve_names(parts);
      if (!p || p->depth() != static_cast<std::size_t>(tax.depth())) throw FormatError(where + ": invalid label path");
      return *p;
    };
    const std::string id = rec["id"].get<std::string>();
    if (!predicted.emplace(id, to_path(rec["labels"])).second) throw FormatError(where + ": duplicate id '" + id + "'");
    if (rec.contains("topk")) {
      for (const json& p : rec["topk"]) topk[id].push_back(to_path(p));
    }
  }

  std::vector<LabelPath> golds, preds;
  std::vector<std::vector<LabelPath>> ranked;
  for (const Document& d : gold_docs) {
    auto it = predicted.find(d.id);
    if (it == predicted.end()) throw FormatError("no prediction for document '" + d.id + "'");
    golds.push_back(d.gold);
    preds.push_back(it->second);
    if (!topk.empty()) {
      auto t = topk.find(d.id);
      if (t == topk.end() || t->second.empty()) throw FormatError("no top-k paths for document '" + d.id + "'");
      ranked.push_back(t->second);
    }
  }
  EvalReport report = micro_macro_f1(golds, preds, tax);
  report.config["gold"] = gold_file.filename().string();
  report.config["predictions"] = pred_file.filename().string();
  report.config["predictions_hash"] = file_fingerprint(pred_file);
  std::string jsonl = report.to_jsonl(tax);
  std::string table = report.to_table(tax);
  if (!ranked.empty()) {
    EvalReport oracle = topk_oracle_f1(golds, ranked, tax);
    jsonl += json{{"record", "topk_oracle"}, {"micro_f1", oracle.micro_f1}, {"macro_f1", oracle.macro_f1}}.dump() + "\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "\ntop-k oracle micro-F1: %.4f  macro-F1: %.4f\n", oracle.micro_f1, oracle.macro_f1);
    table += buf;
  }
  fs::create_directories(cfg.output_dir);
  write_file_atomic(cfg.output_dir / "report.jsonl", jsonl);
  write_file_atomic(cfg.output_dir / "report.txt", table);
  Manifest m(cfg, "evaluate");
  m.input(tax_file);
  m.input(gold_file);
  m.input(pred_file);
  m.output(cfg.output_dir / "report.jsonl");
  m.output(cfg.output_dir / "report.txt");
  m.write();
  out << table;
  return 0;
}

int cmd_serve(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  std::vector<AnnotationTask> tasks;
  if (!cfg.tasks.empty()) {
    require_file(cfg.tasks, "tasks");
    tasks = load_tasks(cfg.tasks, m.taxonomy);
  }
  ServiceConfig sc;
  sc.annotation_log = or_default(cfg.annotation_log, cfg, "annotations.jsonl");
  sc.append_on_annotate = cfg.append_on_annotate;
  sc.api_token = cfg.api_token;
  if (sc.api_token.empty()) {
    if (const char* t = std::getenv("HICL_API_TOKEN")) sc.api_token = t;
  }
  sc.inference = cfg.inference;
  const fs::path db_file = m.db_file;
  const Taxonomy* tax = &m.taxonomy;
  sc.db_loader = [db_file, tax] { return load_db(db_file, tax); };
  fs::create_directories(sc.annotation_log.parent_path().empty() ? fs::path(".") : sc.annotation_log.parent_path());
  AnnotationService service(m.taxonomy, m.params, m.db, m.train, std::move(tasks), build_llm(cfg), sc);
  serve_http(service, cfg.host, cfg.port, cfg.static_dir);
  return 0;
}

}  // namespace

SyntheticFixture make_synthetic_fixture(const SynthConfig& cfg) {
  if (cfg.depth < 1 || cfg.branching < 1) throw ConfigError("synth: depth and branching must be >= 1");
  const auto d = static_cast<std::size_t>(cfg.depth);
  if (cfg.level_vocab.size() != d || cfg.level_words.size() != d) {
    throw ConfigError("synth: level_vocab and level_words need one entry per level");
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (cfg.level_words[j] > cfg.level_vocab[j]) throw ConfigError("synth: level_words exceeds level_vocab");
  }
  if (cfg.noise_words > cfg.common_vocab) throw ConfigError("synth: noise_words exceeds common_vocab");

  Rng rng(cfg.seed);
  std::set<TokenId> used;
  const std::vector<std::string> common = fresh_words(cfg.common_vocab, rng, used);

  // Build the tree breadth-first so ids are grouped by level.
  struct Pending {
    std::vector<int> digits;
    std::string name;
    std::string parent_ref;
    std::vector<std::string> pool;
  };
  std::vector<std::vector<Pending>> levels(d);
  for (int j = 0; j < cfg.depth; ++j) {
    std::vector<std::vector<int>> prefixes;
    if (j == 0) {
      prefixes.push_back({});
    } else {
      for (const auto& p : levels[static_cast<std::size_t>(j - 1)]) prefixes.push_back(p.digits);
    }
    for (std::size_t pi = 0; pi < prefixes.size(); ++pi) {
      for (int b = 0; b < cfg.branching; ++b) {
        Pending n;
        n.digits = prefixes[pi];
        n.digits.push_back(b);
        n.name = level_prefix(j + 1) + " " + node_code(n.digits);
        n.parent_ref = j == 0 ? "ROOT" : levels[static_cast<std::size_t>(j - 1)][pi].name;
        n.pool = fresh_words(cfg.level_vocab[static_cast<std::size_t>(j)], rng, used);
        levels[static_cast<std::size_t>(j)].push_back(std::move(n));
      }
    }
  }

  std::string tax_text;
  for (std::size_t j = 0; j < d; ++j) {
    for (const Pending& n : levels[j]) {
      tax_text += n.name + "\t" + n.parent_ref;
      if (j + 1 == d) {
        std::string desc = n.name + " covers texts about " + join_words(n.pool, ", ") + ".";
        tax_text += "\t" + desc;
      }
      tax_text += "\n";
    }
  }
  SyntheticFixture fx;
  fx.taxonomy = Taxonomy::parse(tax_text);

  // Pools by node id, using the same breadth-first order as the file.
  std::vector<const std::vector<std::string>*> pool_of(fx.taxonomy.size(), nullptr);
  NodeId id = 1;
  for (std::size_t j = 0; j < d; ++j) {
    for (const Pending& n : levels[j]) pool_of[id++] = &n.pool;
  }

  std::size_t counter = 0;
  for (const LabelPath& path : fx.taxonomy.leaf_paths()) {
    for (std::size_t k = 0; k < cfg.docs_per_leaf; ++k) {
      std::vector<std::string> words;
      for (std::size_t j = 0; j < d; ++j) {
        const auto& pool = *pool_of[path.nodes[j]];
        for (std::size_t i : rng.sample_indices(pool.size(), cfg.level_words[j])) words.push_back(pool[i]);
      }
      for (std::size_t i : rng.sample_indices(common.size(), cfg.noise_words)) words.push_back(common[i]);
      rng.shuffle(words);
      Document doc;
      char idbuf[32];
      std::snprintf(idbuf, sizeof idbuf, "d%05zu", ++counter);
      doc.id = idbuf;
      doc.text = join_words(words);
      doc.tokens = tokenize(doc.text);
      doc.gold = path;
      fx.corpus.push_back(std::move(doc));
    }
  }
  // interleave leaves so corpus order carries no label signal
  rng.shuffle(fx.corpus);
  return fx;
}

CorpusSplit split_few_shot(const std::vector<Document>& corpus, const FewShotConfig& cfg) {
  CorpusSplit split;
  split.train = sample(corpus, cfg);
  std::set<std::string> taken;
  for (const Document& d : split.train) taken.insert(d.id);
  for (const Document& d : corpus) {
    if (!taken.count(d.id)) split.heldout.push_back(d);
  }
  return split;
}

const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> kCommands{"synth",    "sample", "describe-labels", "train-indexer", "build-db",
                                                  "search",   "classify", "evaluate",      "serve"};
  return kCommands;
}

int run_pipeline(const RunConfig& cfg, std::string_view command, std::ostream& out, std::ostream& err) {
  try {
    if (command == "synth") return cmd_synth(cfg, out);
    if (command == "sample") return cmd_sample(cfg, out);
    if (command == "describe-labels") return cmd_describe(cfg, out);
    if (command == "train-indexer") return cmd_train(cfg, out, err);
    if (command == "build-db") return cmd_build_db(cfg, out);
    if (command == "search") return cmd_search(cfg, out);
    if (command == "classify") return cmd_classify(cfg, out, err);
    if (command == "evaluate") return cmd_evaluate(cfg, out);
    if (command == "serve") return cmd_serve(cfg);
    err << "hicl: unknown command '" << command << "'\n";
    return 64;
  } catch (const ConfigError& e) {
    err << "hicl " << command << ": configuration error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "hicl " << command << ": format error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "hicl " << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hicl
