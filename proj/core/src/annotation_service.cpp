#include "hicl/annotation_service.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>

#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "hicl/prompt.hpp"
#include "httplib.h"
#include "json.hpp"
#include "text_util.hpp"

namespace hicl {

using nlohmann::json;

namespace {

/// Schema violations inside a request body.
struct BadRequest : Error {
  using Error::Error;
};

HttpResponse json_response(int status, const json& body) { return {status, body.dump(), "application/json"}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}, {"status", status}});
}

json parse_body(std::string_view body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw BadRequest("request body must be a JSON object");
  return doc;
}

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LabelPath path_from_names(const json& names, const Taxonomy& taxonomy) {
  if (!names.is_array()) throw BadRequest("'path' must be an array of label names");
  std::vector<std::string> parts;
  for (const json& n : names) {
    if (!n.is_string()) throw BadRequest("'path' entries must be strings");
    parts.push_back(n.get<std::string>());
  }
  if (parts.size() != static_cast<std::size_t>(taxonomy.depth())) {
    throw BadRequest("'path' must name " + std::to_string(taxonomy.depth()) + " levels");
  }
  auto path = taxonomy.resolve_names(parts);
  if (!path) throw BadRequest("'path' is not a path of the taxonomy");
  return *path;
}

json demos_json(const std::vector<Demonstration>& demos, const Taxonomy& taxonomy) {
  json out = json::array();
  for (const Demonstration& d : demos) {
    out.push_back({{"doc_id", d.doc_id}, {"text", d.text}, {"path", taxonomy.names_of(d.path)}, {"score", d.score}});
  }
  return out;
}

std::string db_fingerprint_of(const RetrievalDatabase& db) {
  return to_hex(db.encoder_fingerprint()) + "/" + std::to_string(db.size());
}

}  // namespace

std::string annotation_to_json(const AnnotationRecord& r, const Taxonomy& taxonomy) {
  return json{{"doc_id", r.doc_id},         {"annotator", r.annotator}, {"path", taxonomy.names_of(r.path)},
              {"suggestions", r.suggestions}, {"seconds", r.seconds},     {"timestamp", r.timestamp},
              {"mode", r.mode}}
      .dump();
}

AnnotationRecord annotation_from_json(std::string_view line, const Taxonomy& taxonomy) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw FormatError("annotation record is not a JSON object");
  try {
    AnnotationRecord r;
    r.doc_id = doc.at("doc_id").get<std::string>();
    r.annotator = doc.value("annotator", "");
    r.path = path_from_names(doc.at("path"), taxonomy);
    r.suggestions = doc.value("suggestions", std::vector<std::string>{});
    r.seconds = doc.at("seconds").get<double>();
    r.timestamp = doc.value("timestamp", "");
    r.mode = doc.value("mode", "");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("annotation record: ") + e.what());
  } catch (const BadRequest& e) {
    throw FormatError(std::string("annotation record: ") + e.what());
  }
}

std::vector<AnnotationRecord> replay_annotation_log(const std::filesystem::path& file, const Taxonomy& taxonomy) {
  std::vector<AnnotationRecord> out;
  if (!std::filesystem::exists(file)) return out;
  const std::string text = read_text_file(file);
  auto lines = detail::split(text, '\n');
  std::size_t last = lines.size();
  while (last > 0 && detail::trim(lines[last - 1]).empty()) --last;
  for (std::size_t i = 0; i < last; ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    try {
      out.push_back(annotation_from_json(lines[i], taxonomy));
    } catch (const FormatError& e) {
      if (i + 1 == last) {
        std::cerr << "warning: skipping torn final record in " << file.string() << '\n';
        break;
      }
      throw FormatError(file.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotationTask> load_tasks(const std::filesystem::path& file, const Taxonomy& taxonomy) {
  std::vector<AnnotationTask> tasks;
  std::size_t line_no = 0;
  const std::string content = read_text_file(file);
  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = file.string() + " line " + std::to_string(line_no);
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw FormatError(where + ": not a JSON object");
    AnnotationTask t;
    t.id = doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>() : std::to_string(line_no);
    if (!doc.contains("text") || !doc["text"].is_string()) throw FormatError(where + ": missing 'text'");
    t.text = doc["text"].get<std::string>();
    if (doc.contains("labels")) {
      try {
        t.gold = path_from_names(doc["labels"], taxonomy);
      } catch (const BadRequest& e) {
        throw FormatError(where + ": " + e.what());
      }
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<AnnotationTask> tasks_from_documents(const std::vector<Document>& docs) {
  std::vector<AnnotationTask> tasks;
  for (const Document& d : docs) tasks.push_back({d.id, d.text, d.gold});
  return tasks;
}

AnnotationService::AnnotationService(Taxonomy taxonomy, EncoderParams params, RetrievalDatabase db,
                                     const std::vector<Document>& train, std::vector<AnnotationTask> tasks,
                                     std::unique_ptr<LlmClient> llm, ServiceConfig cfg)
    : taxonomy_(std::move(taxonomy)),
      params_(std::move(params)),
      params_fp_(params_fingerprint(params_)),
      snapshot_(std::move(db)),
      store_(make_document_store(train)),
      tasks_(std::move(tasks)),
      llm_(std::move(llm)),
      cfg_(std::move(cfg)) {
  cfg_.inference.validate();
  if (cfg_.annotation_log.empty()) throw ConfigError("annotation service needs an annotation log path");
  check_fingerprint(*snapshot_.get(), params_fp_, FingerprintPolicy::Fail);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!task_index_.emplace(tasks_[i].id, i).second) throw ConfigError("duplicate task id '" + tasks_[i].id + "'");
    store_.emplace(tasks_[i].id, tasks_[i].text);
  }
  for (const AnnotationRecord& r : replay_annotation_log(cfg_.annotation_log, taxonomy_)) {
    if (!annotated_.insert(r.doc_id).second) continue;
    apply_annotation(r);
    annotations_.push_back(r);
  }
}

std::vector<AnnotationRecord> AnnotationService::annotations() const {
  std::lock_guard lock(annotations_mu_);
  return annotations_;
}

void AnnotationService::apply_annotation(const AnnotationRecord& record) {
  if (!cfg_.append_on_annotate) return;
  auto it = store_.find(record.doc_id);
  if (it == store_.end()) return;  // annotation for a task no longer loaded
  Document doc{record.doc_id, it->second, tokenize(it->second), record.path};
  if (doc.tokens.empty()) return;
  snapshot_.update([&](const RetrievalDatabase& db) { return append_instance(db, doc, params_, params_fp_); });
}

HttpResponse AnnotationService::handle(std::string_view method, std::string_view target, std::string_view body,
                                       std::string_view authorization) {
  std::string_view path = target.substr(0, target.find('?'));
  try {
    if (!cfg_.api_token.empty() && authorization != "Bearer " + cfg_.api_token) {
      return error_response(401, "missing or invalid bearer token");
    }
    if (reloading_.load() && path != "/api/taxonomy") return error_response(503, "database is reloading");

    if (path == "/api/taxonomy") {
      return method == "GET" ? get_taxonomy() : error_response(405, "use GET");
    }
    if (path == "/api/retrieve") return method == "POST" ? post_retrieve(body) : error_response(405, "use POST");
    if (path == "/api/classify") return method == "POST" ? post_classify(body) : error_response(405, "use POST");
    if (path == "/api/tasks/next") return method == "GET" ? get_next_task() : error_response(405, "use GET");
    if (path == "/api/stats") return method == "GET" ? get_stats() : error_response(405, "use GET");
    if (path == "/api/db/reload") return method == "POST" ? post_reload() : error_response(405, "use POST");

    constexpr std::string_view kTasks = "/api/tasks/";
    constexpr std::string_view kAnnotation = "/annotation";
    if (path.starts_with(kTasks) && path.ends_with(kAnnotation) && path.size() > kTasks.size() + kAnnotation.size()) {
      std::string id(path.substr(kTasks.size(), path.size() - kTasks.size() - kAnnotation.size()));
      if (method != "POST") return error_response(405, "use POST");
      return post_annotation(id, body);
    }
    return error_response(404, "no route for " + std::string(path));
  } catch (const BadRequest& e) {
    return error_response(400, e.what());
  } catch (const LlmError& e) {
    return error_response(502, e.what());
  } catch (const ConfigError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse AnnotationService::get_taxonomy() const {
  json nodes = json::array();
  for (NodeId id = 1; id < taxonomy_.size(); ++id) {
    const LabelNode& n = taxonomy_.node(id);
    json node = {{"id", id},
                 {"name", n.name},
                 {"qualified_name", taxonomy_.qualified_name(id)},
                 {"level", n.level},
                 {"parent", *n.parent == kRootId ? std::string(kRootName) : taxonomy_.qualified_name(*n.parent)},
                 {"children", std::vector<NodeId>(taxonomy_.children_of(id).begin(), taxonomy_.children_of(id).end())}};
    node["description"] = n.description ? json(*n.description) : json(nullptr);
    nodes.push_back(std::move(node));
  }
  auto top = taxonomy_.children_of(kRootId);
  return json_response(200, {{"depth", taxonomy_.depth()},
                             {"root_children", std::vector<NodeId>(top.begin(), top.end())},
                             {"nodes", nodes}});
}

HttpResponse AnnotationService::post_retrieve(std::string_view body) const {
  json req = parse_body(body);
  if (!req.contains("text") || !req["text"].is_string()) throw BadRequest("'text' must be a string");
  std::size_t k = cfg_.inference.k;
  if (req.contains("k")) {
    if (!req["k"].is_number_integer() || req["k"].get<long long>() < 1 ||
        req["k"].get<long long>() > static_cast<long long>(cfg_.max_k)) {
      throw BadRequest("'k' must be an integer in [1, " + std::to_string(cfg_.max_k) + "]");
    }
    k = req["k"].get<std::size_t>();
  }
  auto db = snapshot_.get();
  auto query = encode_query(req["text"].get<std::string>(), params_);
  auto retrieved = retrieve_demos(query, *db, store_, k, cfg_.inference.diversity, &taxonomy_);
  return json_response(200, {{"demos", demos_json(retrieved.demos, taxonomy_)},
                             {"db_fingerprint", db_fingerprint_of(*db)}});
}

HttpResponse AnnotationService::post_classify(std::string_view body) {
  json req = parse_body(body);
  if (!req.contains("text") || !req["text"].is_string()) throw BadRequest("'text' must be a string");
  InferenceConfig cfg = cfg_.inference;
  if (req.contains("options")) {
    const json& o = req["options"];
    if (!o.is_object()) throw BadRequest("'options' must be an object");
    for (const auto& [key, value] : o.items()) {
      if (key == "k") {
        if (!value.is_number_integer() || value.get<long long>() < 1 ||
            value.get<long long>() > static_cast<long long>(cfg_.max_k)) {
          throw BadRequest("'k' must be an integer in [1, " + std::to_string(cfg_.max_k) + "]");
        }
        cfg.k = value.get<std::size_t>();
      } else if (key == "iterative" || key == "demos" || key == "pruning" || key == "candidate_set" ||
                 key == "per_level_retrieval") {
        if (!value.is_boolean()) throw BadRequest("option '" + key + "' must be a boolean");
        bool v = value.get<bool>();
        if (key == "iterative") cfg.iterative = v;
        if (key == "demos") cfg.demos = v;
        if (key == "pruning") cfg.pruning = v;
        if (key == "candidate_set") cfg.candidate_set = v;
        if (key == "per_level_retrieval") cfg.per_level_retrieval = v;
      } else if (key == "fallback") {
        if (!value.is_string()) throw BadRequest("option 'fallback' must be a string");
        cfg.fallback = parse_fallback_policy(value.get<std::string>());
      } else {
        throw BadRequest("unknown option '" + key + "'");
      }
    }
  }
  auto db = snapshot_.get();
  InferenceTrace trace = classify_iterative(req["text"].get<std::string>(), *db, params_, taxonomy_, store_, cfg, *llm_);
  return {200, trace.to_json(taxonomy_), "application/json"};
}

HttpResponse AnnotationService::get_next_task() const {
  std::lock_guard lock(annotations_mu_);
  for (const AnnotationTask& t : tasks_) {
    if (!annotated_.count(t.id)) return json_response(200, {{"id", t.id}, {"text", t.text}});
  }
  return error_response(404, "no unannotated tasks");
}

HttpResponse AnnotationService::post_annotation(const std::string& task_id, std::string_view body) {
  auto task = task_index_.find(task_id);
  if (task == task_index_.end()) return error_response(404, "unknown task '" + task_id + "'");
  json req = parse_body(body);

  AnnotationRecord r;
  r.doc_id = task_id;
  if (!req.contains("path")) throw BadRequest("'path' is required");
  r.path = path_from_names(req["path"], taxonomy_);
  if (!req.contains("seconds") || !req["seconds"].is_number()) throw BadRequest("'seconds' must be a number");
  r.seconds = req["seconds"].get<double>();
  if (!(r.seconds >= 0.0) || !std::isfinite(r.seconds)) throw BadRequest("'seconds' must be >= 0");
  if (req.contains("annotator")) {
    if (!req["annotator"].is_string()) throw BadRequest("'annotator' must be a string");
    r.annotator = req["annotator"].get<std::string>();
  }
  if (req.contains("mode")) {
    if (!req["mode"].is_string()) throw BadRequest("'mode' must be a string");
    r.mode = req["mode"].get<std::string>();
    if (r.mode != "direct" && r.mode != "with-descriptions" && r.mode != "retrieval-assisted") {
      throw BadRequest("'mode' must be direct | with-descriptions | retrieval-assisted");
    }
  }
  if (req.contains("suggestions")) {
    if (!req["suggestions"].is_array()) throw BadRequest("'suggestions' must be an array of strings");
    for (const json& s : req["suggestions"]) {
      if (!s.is_string()) throw BadRequest("'suggestions' must be an array of strings");
      r.suggestions.push_back(s.get<std::string>());
    }
  }
  r.timestamp = utc_now();

  std::lock_guard lock(annotations_mu_);
  if (annotated_.count(task_id)) return error_response(409, "task '" + task_id + "' is already annotated");
  append_line_durable(cfg_.annotation_log, annotation_to_json(r, taxonomy_));
  annotated_.insert(task_id);
  annotations_.push_back(r);
  apply_annotation(r);
  return {201, annotation_to_json(r, taxonomy_), "application/json"};
}

HttpResponse AnnotationService::get_stats() const {
  std::lock_guard lock(annotations_mu_);
  double total_seconds = 0.0;
  std::size_t gold_compared = 0, gold_agree = 0, suggestion_compared = 0, suggestion_agree = 0;
  std::map<std::string, std::pair<std::size_t, double>> by_mode;
  for (const AnnotationRecord& r : annotations_) {
    total_seconds += r.seconds;
    auto& m = by_mode[r.mode.empty() ? "unspecified" : r.mode];
    ++m.first;
    m.second += r.seconds;
    auto t = task_index_.find(r.doc_id);
    if (t != task_index_.end() && tasks_[t->second].gold) {
      ++gold_compared;
      if (*tasks_[t->second].gold == r.path) ++gold_agree;
    }
    if (!r.suggestions.empty()) {
      ++suggestion_compared;
      auto names = taxonomy_.names_of(r.path);
      bool agree = r.suggestions.size() <= names.size() &&
                   std::equal(r.suggestions.begin(), r.suggestions.end(), names.begin());
      if (agree) ++suggestion_agree;
    }
  }
  json modes = json::object();
  for (const auto& [mode, v] : by_mode) {
    modes[mode] = {{"count", v.first}, {"mean_seconds", v.first ? v.second / static_cast<double>(v.first) : 0.0}};
  }
  const std::size_t n = annotations_.size();
  return json_response(200, {{"annotated", n},
                             {"remaining", tasks_.size() - std::min(tasks_.size(), annotated_.size())},
                             {"total_seconds", total_seconds},
                             {"mean_seconds", n ? total_seconds / static_cast<double>(n) : 0.0},
                             {"by_mode", modes},
                             {"agreement",
                              {{"gold_compared", gold_compared},
                               {"gold_agree", gold_agree},
                               {"suggestion_compared", suggestion_compared},
                               {"suggestion_agree", suggestion_agree}}}});
}

HttpResponse AnnotationService::post_reload() {
  if (!cfg_.db_loader) return error_response(400, "no database loader configured");
  bool expected = false;
  if (!reloading_.compare_exchange_strong(expected, true)) return error_response(503, "database is reloading");
  struct Clear {
    std::atomic<bool>& flag;
    ~Clear() { flag.store(false); }
  } clear{reloading_};

  RetrievalDatabase next = cfg_.db_loader();
  if (next.depth() != taxonomy_.depth()) return error_response(409, "reloaded database depth does not match taxonomy");
  if (!check_fingerprint(next, params_fp_, FingerprintPolicy::Warn)) {
    return error_response(409, "reloaded database was built with different encoder params");
  }
  std::lock_guard lock(annotations_mu_);
  snapshot_.publish(std::make_shared<const RetrievalDatabase>(std::move(next)));
  // annotations fed into the old snapshot are replayed into the new one
  for (const AnnotationRecord& r : annotations_) apply_annotation(r);
  auto db = snapshot_.get();
  return json_response(200, {{"instances", db->size()}, {"db_fingerprint", db_fingerprint_of(*db)}});
}

void serve_http(AnnotationService& service, const std::string& host, int port,
                const std::filesystem::path& static_dir) {
  httplib::Server server;
  auto route = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpResponse out = service.handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/api/.*)", route);
  server.Post(R"(/api/.*)", route);
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) {
    server.set_mount_point("/", static_dir.string());
  }
  std::cerr << "listening on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace hicl
