#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/corpus.hpp"
#include "hicl/encoder.hpp"
#include "hicl/inference.hpp"
#include "hicl/llm_client.hpp"
#include "hicl/retrieval.hpp"
#include "hicl/taxonomy.hpp"

namespace hicl {

struct AnnotationRecord {
  std::string doc_id;
  std::string annotator;
  LabelPath path;
  std::vector<std::string> suggestions;  // per level, what the UI suggested
  double seconds = 0.0;
  std::string timestamp;  // UTC, ISO 8601
  std::string mode;       // direct | with-descriptions | retrieval-assisted

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::string annotation_to_json(const AnnotationRecord& record, const Taxonomy& taxonomy);
AnnotationRecord annotation_from_json(std::string_view line, const Taxonomy& taxonomy);

/// Reads an annotation log. A malformed final line (a write cut short by a
/// crash, never acknowledged) is skipped; malformed earlier lines throw.
std::vector<AnnotationRecord> replay_annotation_log(const std::filesystem::path& file, const Taxonomy& taxonomy);

/// A document waiting for annotation. Gold is optional and only used for
/// agreement counts.
struct AnnotationTask {
  std::string id;
  std::string text;
  std::optional<LabelPath> gold;
};

/// JSON lines {"id", "text", optional "labels"}.
std::vector<AnnotationTask> load_tasks(const std::filesystem::path& file, const Taxonomy& taxonomy);
std::vector<AnnotationTask> tasks_from_documents(const std::vector<Document>& docs);

struct ServiceConfig {
  std::filesystem::path annotation_log;
  bool append_on_annotate = false;  // feed annotated documents into the database
  std::string api_token;            // empty: no auth
  InferenceConfig inference;
  std::size_t max_k = 50;
  /// Used by POST /api/db/reload.
  std::function<RetrievalDatabase()> db_loader;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling for the annotation API, independent of any HTTP server.
///
///   GET  /api/taxonomy                 tree with descriptions
///   POST /api/retrieve                 {text, k} -> demos with scores and paths
///   POST /api/classify                 {text, options} -> inference trace
///   GET  /api/tasks/next               next unannotated task
///   POST /api/tasks/{id}/annotation    {path, seconds, annotator?, mode?, suggestions?}
///   GET  /api/stats                    throughput and agreement counts
///   POST /api/db/reload                reload the database via the configured loader
///
/// Errors: 400 schema, 401 bad token, 404 unknown route or task, 409 double
/// annotation, 503 while the database reloads.
class AnnotationService {
 public:
  AnnotationService(Taxonomy taxonomy, EncoderParams params, RetrievalDatabase db, const std::vector<Document>& train,
                    std::vector<AnnotationTask> tasks, std::unique_ptr<LlmClient> llm, ServiceConfig cfg);

  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body,
                      std::string_view authorization = {});

  std::shared_ptr<const RetrievalDatabase> database() const { return snapshot_.get(); }
  std::vector<AnnotationRecord> annotations() const;
  const Taxonomy& taxonomy() const { return taxonomy_; }

 private:
  HttpResponse get_taxonomy() const;
  HttpResponse post_retrieve(std::string_view body) const;
  HttpResponse post_classify(std::string_view body);
  HttpResponse get_next_task() const;
  HttpResponse post_annotation(const std::string& task_id, std::string_view body);
  HttpResponse get_stats() const;
  HttpResponse post_reload();

  void apply_annotation(const AnnotationRecord& record);

  Taxonomy taxonomy_;
  EncoderParams params_;
  std::uint64_t params_fp_;
  DatabaseSnapshot snapshot_;
  DocumentStore store_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::unique_ptr<LlmClient> llm_;
  ServiceConfig cfg_;

  mutable std::mutex annotations_mu_;  // the single writer
  std::vector<AnnotationRecord> annotations_;
  std::set<std::string> annotated_;
  std::atomic<bool> reloading_{false};
};

/// Blocking HTTP server around a service. Static files under `static_dir`
/// are served at "/" when the directory exists.
void serve_http(AnnotationService& service, const std::string& host, int port,
                const std::filesystem::path& static_dir = {});

}  // namespace hicl
