#include <gtest/gtest.h>

#include <condition_variable>
#include <csignal>
#include <fstream>
#include <future>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "hicl/annotation_service.hpp"
#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace hicl;
using nlohmann::json;

namespace {

struct World {
  Taxonomy tax = test::small_taxonomy();
  EncoderParams params = EncoderParams::initialize(EncoderShape::for_taxonomy(tax, 16), 3);
  std::vector<Document> train;
  std::vector<AnnotationTask> tasks;

  World() {
    train = {test::make_doc(tax, "t1", "neural network gradient training", {"CS", "ML"}),
             test::make_doc(tax, "t2", "sql query index storage", {"CS", "DB"}),
             test::make_doc(tax, "t3", "gene allele inheritance", {"Bio", "Genetics"}),
             test::make_doc(tax, "t4", "forest species habitat", {"Bio", "Ecology"})};
    tasks = {{"q1", "deep neural network layers", *tax.resolve_names(std::vector<std::string>{"CS", "ML"})},
             {"q2", "wetland species survey", *tax.resolve_names(std::vector<std::string>{"Bio", "Ecology"})},
             {"q3", "query optimizer joins", std::nullopt}};
  }
  RetrievalDatabase db() const { return build_database(train, params, tax); }
  std::unique_ptr<AnnotationService> service(const ServiceConfig& cfg) const {
    return std::make_unique<AnnotationService>(tax, params, db(), train, tasks, std::make_unique<OracleDemoClient>(),
                                               cfg);
  }
};

ServiceConfig config(const test::TempDir& dir) {
  ServiceConfig cfg;
  cfg.annotation_log = dir / "annotations.jsonl";
  return cfg;
}

json body_of(const HttpResponse& r) { return json::parse(r.body); }

std::string annotation(const std::vector<std::string>& path, double seconds, const std::string& mode = "direct") {
  return json{{"path", path}, {"seconds", seconds}, {"mode", mode}, {"annotator", "ann1"}}.dump();
}

}  // namespace

TEST(Service, TaxonomyEndpoint) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  auto r = svc->handle("GET", "/api/taxonomy", "");
  ASSERT_EQ(r.status, 200);
  auto b = body_of(r);
  EXPECT_EQ(b["depth"], 2);
  EXPECT_EQ(b["nodes"].size(), 6u);
  EXPECT_EQ(b["nodes"][2]["qualified_name"], "CS/ML");
  EXPECT_EQ(b["nodes"][2]["parent"], "CS");
  EXPECT_EQ(b["nodes"][0]["parent"], "Root");
  EXPECT_EQ(b["nodes"][2]["description"], "Machine learning papers about models and training.");
  EXPECT_TRUE(b["nodes"][0]["description"].is_null());
  EXPECT_EQ(svc->handle("POST", "/api/taxonomy", "").status, 405);
  EXPECT_EQ(svc->handle("GET", "/api/nothing", "").status, 404);
}

TEST(Service, RetrieveSelfScoresOne) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  auto r = svc->handle("POST", "/api/retrieve", json{{"text", "sql query index storage"}, {"k", 2}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  auto b = body_of(r);
  ASSERT_EQ(b["demos"].size(), 2u);
  EXPECT_EQ(b["demos"][0]["doc_id"], "t2");
  EXPECT_NEAR(b["demos"][0]["score"].get<double>(), 1.0, 1e-6);
  EXPECT_EQ(b["demos"][0]["path"], (json{"CS", "DB"}));
  EXPECT_EQ(b["db_fingerprint"], to_hex(params_fingerprint(w.params)) + "/4");
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"x\", \"k\": 0}").status, 400);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"x\", \"k\": 51}").status, 400);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": 3}").status, 400);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "not json").status, 400);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"!!!\"}").status, 400);
  EXPECT_EQ(svc->handle("GET", "/api/retrieve", "").status, 405);
}

TEST(Service, ClassifyWithOptions) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  auto r = svc->handle("POST", "/api/classify", json{{"text", "gene allele inheritance"}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  auto b = body_of(r);
  EXPECT_EQ(b["mode"], "iterative");
  EXPECT_EQ(b["predicted"], (json{"Bio", "Genetics"}));
  EXPECT_EQ(b["llm_calls"], 2);
  EXPECT_EQ(b["levels"][0]["current"], "Root");

  r = svc->handle("POST", "/api/classify",
                  json{{"text", "gene allele inheritance"}, {"options", {{"iterative", false}, {"k", 2}}}}.dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(body_of(r)["mode"], "path");
  EXPECT_EQ(body_of(r)["llm_calls"], 1);
  r = svc->handle("POST", "/api/classify", json{{"text", "x"}, {"options", {{"candidate_set", false}}}}.dump());
  EXPECT_EQ(body_of(r)["mode"], "pick-example");
  EXPECT_EQ(svc->handle("POST", "/api/classify", json{{"text", "x"}, {"options", {{"temperature", 1}}}}.dump()).status,
            400);
  EXPECT_EQ(svc->handle("POST", "/api/classify", json{{"text", "x"}, {"options", {{"pruning", "no"}}}}.dump()).status,
            400);
  EXPECT_EQ(svc->handle("POST", "/api/classify", json{{"text", "x"}, {"options", {{"fallback", "odd"}}}}.dump()).status,
            400);
  EXPECT_EQ(svc->handle("POST", "/api/classify", json{{"text", "x"}, {"options", 3}}.dump()).status, 400);
}

TEST(Service, LlmFailureIs502) {
  test::TempDir dir;
  World w;
  AnnotationService svc(w.tax, w.params, w.db(), w.train, w.tasks,
                        std::make_unique<FixedScriptClient>(std::vector<std::string>{}), config(dir));
  EXPECT_EQ(svc.handle("POST", "/api/classify", json{{"text", "gene"}}.dump()).status, 502);
}

TEST(Service, TaskFlowAndConflicts) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  std::set<std::string> seen;
  for (int i = 0; i < 3; ++i) {
    auto next = svc->handle("GET", "/api/tasks/next", "");
    ASSERT_EQ(next.status, 200);
    std::string id = body_of(next)["id"];
    EXPECT_TRUE(seen.insert(id).second) << "task served twice: " << id;
    auto ack = svc->handle("POST", "/api/tasks/" + id + "/annotation", annotation({"CS", "ML"}, 2.0 + i));
    EXPECT_EQ(ack.status, 201) << ack.body;
    EXPECT_EQ(body_of(ack)["doc_id"], id);
  }
  EXPECT_EQ(svc->handle("GET", "/api/tasks/next", "").status, 404);
  EXPECT_EQ(svc->handle("POST", "/api/tasks/q1/annotation", annotation({"CS", "ML"}, 1.0)).status, 409);
  EXPECT_EQ(svc->handle("POST", "/api/tasks/zzz/annotation", annotation({"CS", "ML"}, 1.0)).status, 404);
  EXPECT_EQ(svc->handle("GET", "/api/tasks/q1/annotation", "").status, 405);
  EXPECT_EQ(svc->annotations().size(), 3u);
}

TEST(Service, AnnotationSchema) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  auto post = [&](const std::string& body) { return svc->handle("POST", "/api/tasks/q1/annotation", body).status; };
  EXPECT_EQ(post(json{{"path", {"CS", "Ecology"}}, {"seconds", 1}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", {"CS"}}, {"seconds", 1}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", "CS/ML"}, {"seconds", 1}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", {"CS", "ML"}}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", {"CS", "ML"}}, {"seconds", -1}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", {"CS", "ML"}}, {"seconds", 1}, {"mode", "fast"}}.dump()), 400);
  EXPECT_EQ(post(json{{"path", {"CS", "ML"}}, {"seconds", 1}, {"suggestions", {1}}}.dump()), 400);
  EXPECT_EQ(post("[]"), 400);
  EXPECT_TRUE(svc->annotations().empty());
  EXPECT_EQ(post(json{{"path", {"CS", "ML"}}, {"seconds", 0}}.dump()), 201);
}

TEST(Service, Stats) {
  test::TempDir dir;
  World w;
  auto svc = w.service(config(dir));
  auto empty = body_of(svc->handle("GET", "/api/stats", ""));
  EXPECT_EQ(empty["annotated"], 0);
  EXPECT_EQ(empty["remaining"], 3);
  EXPECT_EQ(empty["mean_seconds"], 0.0);
  auto with_sugg = json{{"path", {"CS", "ML"}}, {"seconds", 4.0}, {"mode", "retrieval-assisted"},
                        {"suggestions", {"CS", "ML"}}};
  ASSERT_EQ(svc->handle("POST", "/api/tasks/q1/annotation", with_sugg.dump()).status, 201);
  auto disagree = json{{"path", {"Bio", "Genetics"}}, {"seconds", 2.0}, {"mode", "direct"}, {"suggestions", {"Bio", "Ecology"}}};
  ASSERT_EQ(svc->handle("POST", "/api/tasks/q2/annotation", disagree.dump()).status, 201);
  ASSERT_EQ(svc->handle("POST", "/api/tasks/q3/annotation", annotation({"CS", "DB"}, 6.0)).status, 201);
  auto s = body_of(svc->handle("GET", "/api/stats", ""));
  EXPECT_EQ(s["annotated"], 3);
  EXPECT_EQ(s["remaining"], 0);
  EXPECT_DOUBLE_EQ(s["total_seconds"].get<double>(), 12.0);
  EXPECT_DOUBLE_EQ(s["mean_seconds"].get<double>(), 4.0);
  EXPECT_EQ(s["by_mode"]["direct"]["count"], 2);
  EXPECT_DOUBLE_EQ(s["by_mode"]["direct"]["mean_seconds"].get<double>(), 4.0);
  EXPECT_EQ(s["agreement"]["gold_compared"], 2);
  EXPECT_EQ(s["agreement"]["gold_agree"], 1);
  EXPECT_EQ(s["agreement"]["suggestion_compared"], 2);
  EXPECT_EQ(s["agreement"]["suggestion_agree"], 1);
}

TEST(Service, BearerToken) {
  test::TempDir dir;
  World w;
  auto cfg = config(dir);
  cfg.api_token = "secret";
  auto svc = w.service(cfg);
  EXPECT_EQ(svc->handle("GET", "/api/taxonomy", "").status, 401);
  EXPECT_EQ(svc->handle("GET", "/api/taxonomy", "", "Bearer wrong").status, 401);
  EXPECT_EQ(svc->handle("GET", "/api/taxonomy", "", "Bearer secret").status, 200);
}

TEST(Service, AppendOnAnnotateRanksNewInstanceFirst) {
  test::TempDir dir;
  World w;
  auto cfg = config(dir);
  cfg.append_on_annotate = true;
  auto svc = w.service(cfg);
  ASSERT_EQ(svc->handle("POST", "/api/tasks/q3/annotation", annotation({"CS", "DB"}, 1.0)).status, 201);
  EXPECT_EQ(svc->database()->size(), 5u);
  auto b = body_of(svc->handle("POST", "/api/retrieve", json{{"text", "query optimizer joins"}, {"k", 1}}.dump()));
  EXPECT_EQ(b["demos"][0]["doc_id"], "q3");
  EXPECT_NEAR(b["demos"][0]["score"].get<double>(), 1.0, 1e-6);
  EXPECT_EQ(b["db_fingerprint"], to_hex(params_fingerprint(w.params)) + "/5");

  // a restart rebuilds the same database from the log
  auto again = w.service(cfg);
  EXPECT_EQ(again->database()->size(), 5u);
  EXPECT_EQ(*again->database(), *svc->database());
}

TEST(Service, ReloadStates) {
  test::TempDir dir;
  World w;
  std::promise<void> entered;
  std::promise<void> release;
  auto release_future = release.get_future().share();
  auto cfg = config(dir);
  cfg.append_on_annotate = true;
  cfg.db_loader = [&, release_future] {
    entered.set_value();
    release_future.wait();
    return w.db();
  };
  auto svc = w.service(cfg);
  ASSERT_EQ(svc->handle("POST", "/api/tasks/q1/annotation", annotation({"CS", "ML"}, 1.0)).status, 201);
  auto entered_future = entered.get_future();
  auto reload = std::async(std::launch::async, [&] { return svc->handle("POST", "/api/db/reload", ""); });
  entered_future.wait();
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"gene\"}").status, 503);
  EXPECT_EQ(svc->handle("GET", "/api/tasks/next", "").status, 503);
  EXPECT_EQ(svc->handle("POST", "/api/db/reload", "").status, 503);
  EXPECT_EQ(svc->handle("GET", "/api/taxonomy", "").status, 200);
  release.set_value();
  auto done = reload.get();
  ASSERT_EQ(done.status, 200) << done.body;
  // the annotated task is replayed into the reloaded database
  EXPECT_EQ(body_of(done)["instances"], 5);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"gene\"}").status, 200);
}

TEST(Service, ReloadRejectsMismatchedDatabase) {
  test::TempDir dir;
  World w;
  auto cfg = config(dir);
  auto other = EncoderParams::initialize(EncoderShape::for_taxonomy(w.tax, 16), 99);
  cfg.db_loader = [&] { return build_database(w.train, other, w.tax); };
  auto svc = w.service(cfg);
  EXPECT_EQ(svc->handle("POST", "/api/db/reload", "").status, 409);
  EXPECT_EQ(svc->handle("POST", "/api/retrieve", "{\"text\": \"gene\"}").status, 200);
  auto no_loader = w.service(config(dir));
  EXPECT_EQ(no_loader->handle("POST", "/api/db/reload", "").status, 400);
}

TEST(Service, ConstructorChecks) {
  test::TempDir dir;
  World w;
  auto other = EncoderParams::initialize(EncoderShape::for_taxonomy(w.tax, 16), 99);
  EXPECT_THROW(AnnotationService(w.tax, other, w.db(), w.train, w.tasks, std::make_unique<OracleDemoClient>(),
                                 config(dir)),
               ConfigError);
  EXPECT_THROW(AnnotationService(w.tax, w.params, w.db(), w.train, w.tasks, std::make_unique<OracleDemoClient>(),
                                 ServiceConfig{}),
               ConfigError);
  auto dup = w.tasks;
  dup.push_back(dup.front());
  EXPECT_THROW(AnnotationService(w.tax, w.params, w.db(), w.train, dup, std::make_unique<OracleDemoClient>(),
                                 config(dir)),
               ConfigError);
}

TEST(AnnotationLog, TornFinalLineIsSkipped) {
  test::TempDir dir;
  World w;
  auto cfg = config(dir);
  {
    auto svc = w.service(cfg);
    ASSERT_EQ(svc->handle("POST", "/api/tasks/q1/annotation", annotation({"CS", "ML"}, 1.0)).status, 201);
  }
  {
    std::ofstream out(cfg.annotation_log, std::ios::app);
    out << "{\"doc_id\": \"q2\", \"path\": [\"Bio\"";
  }
  auto records = replay_annotation_log(cfg.annotation_log, w.tax);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].doc_id, "q1");
  EXPECT_EQ(records[0].annotator, "ann1");
  auto svc = w.service(cfg);
  EXPECT_EQ(svc->annotations().size(), 1u);
  EXPECT_EQ(body_of(svc->handle("GET", "/api/tasks/next", ""))["id"], "q2");

  {
    std::ofstream out(cfg.annotation_log, std::ios::app);
    out << "\n" << annotation_to_json(records[0], w.tax) << "\n";
  }
  EXPECT_THROW(replay_annotation_log(cfg.annotation_log, w.tax), FormatError);
}

TEST(AnnotationLog, RecordRoundTrip) {
  World w;
  AnnotationRecord r{"q1", "ann", *w.tax.resolve_names(std::vector<std::string>{"Bio", "Ecology"}), {"Bio"}, 3.5,
                     "2026-01-01T00:00:00Z", "with-descriptions"};
  EXPECT_EQ(annotation_from_json(annotation_to_json(r, w.tax), w.tax), r);
  EXPECT_THROW(annotation_from_json("{\"doc_id\": 1}", w.tax), FormatError);
}

TEST(AnnotationLog, SurvivesKill) {
  test::TempDir dir;
  World w;
  auto cfg = config(dir);
  int fds[2];
  ASSERT_EQ(::pipe(fds), 0);
  pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    ::close(fds[0]);
    auto svc = w.service(cfg);
    for (const char* id : {"q1", "q2"}) {
      auto r = svc->handle("POST", std::string("/api/tasks/") + id + "/annotation", annotation({"CS", "DB"}, 1.0));
      if (r.status != 201) ::_exit(3);
      char ack = 'a';
      if (::write(fds[1], &ack, 1) != 1) ::_exit(4);
    }
    // wait to be killed
    for (;;) ::pause();
  }
  ::close(fds[1]);
  char buf;
  int acks = 0;
  while (acks < 2 && ::read(fds[0], &buf, 1) == 1) ++acks;
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  ::close(fds[0]);
  ASSERT_EQ(acks, 2);
  EXPECT_TRUE(WIFSIGNALED(status));

  auto svc = w.service(cfg);
  auto ann = svc->annotations();
  ASSERT_EQ(ann.size(), 2u);
  EXPECT_EQ(ann[0].doc_id, "q1");
  EXPECT_EQ(ann[1].doc_id, "q2");
  EXPECT_EQ(body_of(svc->handle("GET", "/api/tasks/next", ""))["id"], "q3");
  EXPECT_EQ(svc->handle("POST", "/api/tasks/q2/annotation", annotation({"CS", "DB"}, 1.0)).status, 409);
}

TEST(AnnotationTasks, LoadFromFile) {
  test::TempDir dir;
  World w;
  {
    std::ofstream out(dir / "tasks.jsonl");
    out << "{\"id\": \"x\", \"text\": \"alpha\", \"labels\": [\"CS\", \"ML\"]}\n\n{\"text\": \"beta\"}\n";
  }
  auto tasks = load_tasks(dir / "tasks.jsonl", w.tax);
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[0].id, "x");
  EXPECT_TRUE(tasks[0].gold);
  EXPECT_EQ(tasks[1].id, "3");
  EXPECT_FALSE(tasks[1].gold);
  {
    std::ofstream out(dir / "bad.jsonl");
    out << "{\"text\": \"alpha\", \"labels\": [\"CS\", \"Ecology\"]}\n";
  }
  EXPECT_THROW(load_tasks(dir / "bad.jsonl", w.tax), FormatError);
  EXPECT_EQ(tasks_from_documents(w.train).size(), 4u);
}

namespace {

int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

}  // namespace

TEST(ServeHttp, RoutesOverTheWire) {
  test::TempDir dir;
  World w;
  std::filesystem::create_directories(dir / "static");
  {
    std::ofstream out(dir / "static" / "index.html");
    out << "<html>annotate</html>";
  }
  const int port = free_port();
  pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    auto cfg = config(dir);
    cfg.api_token = "tok";
    auto svc = w.service(cfg);
    try {
      serve_http(*svc, "127.0.0.1", port, dir / "static");
    } catch (...) {
    }
    ::_exit(0);
  }
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(1, 0);
  httplib::Headers auth{{"Authorization", "Bearer tok"}};
  httplib::Result res;
  for (int i = 0; i < 100 && !res; ++i) {
    res = cli.Get("/api/taxonomy", auth);
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["depth"], 2);
  auto unauth = cli.Get("/api/stats");
  ASSERT_TRUE(unauth);
  EXPECT_EQ(unauth->status, 401);
  auto ann = cli.Post("/api/tasks/q1/annotation", auth, annotation({"CS", "ML"}, 1.0), "application/json");
  ASSERT_TRUE(ann);
  EXPECT_EQ(ann->status, 201);
  auto page = cli.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->body, "<html>annotate</html>");
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
}
