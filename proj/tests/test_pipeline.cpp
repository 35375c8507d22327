#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "hicl/io.hpp"
#include "hicl/pipeline.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace hicl;
using nlohmann::json;

namespace {

RunConfig small_run(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.output_dir = dir;
  cfg.synth.depth = 2;
  cfg.synth.branching = 2;
  cfg.synth.docs_per_leaf = 4;
  cfg.synth.level_vocab = {6, 6};
  cfg.synth.level_words = {3, 4};
  cfg.few_shot.q = 2;
  cfg.train_cfg.dim = 8;
  cfg.train_cfg.epochs = 2;
  cfg.train_cfg.lr = 1e-3;
  cfg.record_topk = 3;
  cfg.save_trace = true;
  return cfg;
}

int run(const RunConfig& cfg, const std::string& cmd, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  int rc = run_pipeline(cfg, cmd, out, err);
  if (out_text) *out_text = out.str();
  if (rc != 0) ADD_FAILURE() << cmd << " exited " << rc << ": " << err.str();
  return rc;
}

void run_all(const RunConfig& cfg) {
  for (const char* cmd : {"synth", "sample", "describe-labels", "train-indexer", "build-db", "classify", "evaluate"}) {
    ASSERT_EQ(run(cfg, cmd), 0) << cmd;
  }
}

}  // namespace

TEST(SyntheticFixture, ShapeAndDeterminism) {
  SynthConfig sc;
  auto a = make_synthetic_fixture(sc);
  auto b = make_synthetic_fixture(sc);
  EXPECT_EQ(a.taxonomy.depth(), 3);
  EXPECT_EQ(a.taxonomy.leaves().size(), 27u);
  EXPECT_EQ(a.corpus.size(), 27u * 8);
  EXPECT_TRUE(a.taxonomy.all_leaves_described());
  EXPECT_EQ(a.taxonomy.serialize(), b.taxonomy.serialize());
  ASSERT_EQ(a.corpus.size(), b.corpus.size());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.corpus.size(); ++i) {
    EXPECT_EQ(a.corpus[i].text, b.corpus[i].text);
    EXPECT_TRUE(ids.insert(a.corpus[i].id).second);
  }
  sc.seed = 5;
  EXPECT_NE(make_synthetic_fixture(sc).corpus[0].text, a.corpus[0].text);
}

TEST(SyntheticFixture, SplitIsDisjointAndComplete) {
  auto fx = make_synthetic_fixture(SynthConfig{});
  FewShotConfig fs;
  fs.q = 2;
  auto split = split_few_shot(fx.corpus, fs);
  EXPECT_EQ(split.train.size(), 54u);
  EXPECT_EQ(split.train.size() + split.heldout.size(), fx.corpus.size());
  std::set<std::string> train_ids;
  for (const auto& d : split.train) train_ids.insert(d.id);
  for (const auto& d : split.heldout) EXPECT_FALSE(train_ids.count(d.id));
}

TEST(Pipeline, EndToEndWritesArtifacts) {
  test::TempDir dir;
  auto cfg = small_run(dir.path());
  run_all(cfg);
  for (const char* f : {"taxonomy.tsv", "corpus.jsonl", "train.jsonl", "heldout.jsonl", "params.bin", "db.bin",
                        "predictions.jsonl", "report.jsonl", "report.txt", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  auto manifest = json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["version"], std::string(kVersion));
  for (const char* cmd : {"synth", "sample", "train-indexer", "build-db", "classify", "evaluate"}) {
    EXPECT_TRUE(manifest["commands"].contains(cmd)) << cmd;
  }
  EXPECT_EQ(manifest["commands"]["train-indexer"]["outputs"]["params.bin"], file_fingerprint(dir / "params.bin"));

  const std::string preds = read_text_file(dir / "predictions.jsonl");
  auto first = json::parse(preds.substr(0, preds.find('\n')));
  EXPECT_EQ(first["labels"].size(), 2u);
  EXPECT_EQ(first["topk"].size(), 3u);
  EXPECT_EQ(first["trace"]["mode"], "iterative");

  const std::string report = read_text_file(dir / "report.jsonl");
  auto summary = json::parse(report.substr(0, report.find('\n')));
  EXPECT_EQ(summary["record"], "summary");
  EXPECT_GE(summary["micro_f1"].get<double>(), 0.0);
  EXPECT_NE(report.find("topk_oracle"), std::string::npos);

  std::string out;
  cfg.text = "some query words";
  EXPECT_EQ(run(cfg, "search", &out), 0);
  EXPECT_NE(out.find("score"), std::string::npos);
  cfg.retrieval_only = true;
  EXPECT_EQ(run(cfg, "classify", &out), 0);
  EXPECT_EQ(json::parse(out).size(), 2u);
}

TEST(Pipeline, RerunIsByteIdentical) {
  test::TempDir a, b;
  run_all(small_run(a.path()));
  run_all(small_run(b.path()));
  for (const char* f : {"taxonomy.tsv", "corpus.jsonl", "train.jsonl", "params.bin", "db.bin", "predictions.jsonl",
                        "report.jsonl"}) {
    EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
  }
  auto ma = json::parse(read_text_file(a / "manifest.json"));
  auto mb = json::parse(read_text_file(b / "manifest.json"));
  EXPECT_EQ(ma["commands"]["classify"]["outputs"], mb["commands"]["classify"]["outputs"]);
}

TEST(Pipeline, FailuresMapToExitCodes) {
  test::TempDir dir;
  auto cfg = small_run(dir.path());
  std::ostringstream out, err;
  EXPECT_EQ(run_pipeline(cfg, "frobnicate", out, err), 64);
  ASSERT_EQ(run(cfg, "synth"), 0);
  ASSERT_EQ(run(cfg, "sample"), 0);
  ASSERT_EQ(run(cfg, "train-indexer"), 0);
  err.str("");
  EXPECT_EQ(run_pipeline(cfg, "classify", out, err), 2);
  EXPECT_NE(err.str().find("db.bin"), std::string::npos) << err.str();

  ASSERT_EQ(run(cfg, "build-db"), 0);
  std::string db = read_text_file(dir / "db.bin");
  db[db.size() / 2] ^= 0x40;
  write_file_atomic(dir / "db.bin", db);
  err.str("");
  EXPECT_EQ(run_pipeline(cfg, "classify", out, err), 3);
  EXPECT_NE(err.str().find("checksum"), std::string::npos) << err.str();

  // a database built by other params is refused
  ASSERT_EQ(run(cfg, "build-db"), 0);
  auto other = cfg;
  other.train_cfg.seed = 99;
  ASSERT_EQ(run(other, "train-indexer"), 0);
  err.str("");
  EXPECT_EQ(run_pipeline(cfg, "classify", out, err), 2);

  auto bad = cfg;
  bad.inference.k = 0;
  ASSERT_EQ(run(cfg, "build-db"), 0);
  EXPECT_EQ(run_pipeline(bad, "classify", out, err), 2);
  EXPECT_EQ(pipeline_commands().size(), 9u);
}
