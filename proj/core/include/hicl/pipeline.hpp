#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/corpus.hpp"
#include "hicl/inference.hpp"
#include "hicl/taxonomy.hpp"
#include "hicl/trainer.hpp"

namespace hicl {

inline constexpr std::string_view kVersion = "0.1.0";

/// Separable synthetic taxonomy: every node owns a pool of made-up words;
/// a document draws words from each node on its path plus shared filler.
struct SynthConfig {
  int depth = 3;
  int branching = 3;
  std::size_t docs_per_leaf = 8;
  std::vector<std::size_t> level_vocab{10, 10, 8};  // pool size per node, by level
  std::vector<std::size_t> level_words{3, 3, 5};     // words drawn per document, by level
  std::size_t common_vocab = 40;
  std::size_t noise_words = 4;
  std::uint64_t seed = 171;
};

struct SyntheticFixture {
  Taxonomy taxonomy;  // leaves carry descriptions listing their pool words
  std::vector<Document> corpus;
};

SyntheticFixture make_synthetic_fixture(const SynthConfig& cfg);

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> heldout;  // everything not sampled, corpus order
};

CorpusSplit split_few_shot(const std::vector<Document>& corpus, const FewShotConfig& cfg);

/// Settings for one command. Empty paths default to fixed names inside
/// output_dir (taxonomy.tsv, corpus.jsonl, train.jsonl, heldout.jsonl,
/// params.bin, db.bin, predictions.jsonl, annotations.jsonl).
struct RunConfig {
  std::filesystem::path output_dir = ".";
  std::filesystem::path taxonomy, corpus, train, heldout, params, db, predictions, tasks, annotation_log, static_dir;

  SynthConfig synth;
  FewShotConfig few_shot;
  TrainConfig train_cfg;
  InferenceConfig inference;

  std::string llm = "stub:oracle-demo";
  std::filesystem::path llm_log;  // audit log; empty: none
  std::size_t max_in_flight = 4;

  std::string text;             // search / classify a single text
  bool retrieval_only = false;  // classify without the LLM
  bool save_trace = false;      // embed traces in predictions
  std::size_t record_topk = 0;  // store the top-k retrieved paths per prediction
  bool force_describe = false;

  std::string host = "127.0.0.1";
  int port = 8080;
  bool append_on_annotate = false;
  std::string api_token;
};

/// synth | sample | describe-labels | train-indexer | build-db | search |
/// classify | evaluate | serve. Writes artifacts plus manifest.json (seeds,
/// versions, file hashes) into output_dir. Returns the exit status; errors
/// are reported on `err` with the command name.
int run_pipeline(const RunConfig& cfg, std::string_view command, std::ostream& out, std::ostream& err);

const std::vector<std::string>& pipeline_commands();

}  // namespace hicl
