// hicl: command-line front end for the hierarchical ICL pipeline.
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hicl/corpus.hpp"
#include "hicl/error.hpp"
#include "hicl/pipeline.hpp"
#include "hicl/taxonomy.hpp"

namespace {

struct Flags {
  std::string label_text = "description";
  std::string sampling = "balanced";
  std::string fallback = "top-ranked";
  std::string diversity = "full-path";
  bool no_iterative = false, no_demos = false, no_pruning = false, no_candidate_set = false;
};

void add_paths(CLI::App* sub, hicl::RunConfig& cfg) {
  sub->add_option("-o,--out", cfg.output_dir, "Output directory (also the default location of inputs)");
  sub->add_option("--taxonomy", cfg.taxonomy, "Taxonomy file");
  sub->add_option("--corpus", cfg.corpus, "Full corpus (JSON lines)");
  sub->add_option("--train", cfg.train, "Few-shot training corpus");
  sub->add_option("--heldout", cfg.heldout, "Held-out / input corpus");
  sub->add_option("--params", cfg.params, "Indexer params file");
  sub->add_option("--db", cfg.db, "Retrieval database file");
  sub->add_option("--predictions", cfg.predictions, "Predictions file");
}

void add_llm(CLI::App* sub, hicl::RunConfig& cfg) {
  sub->add_option("--llm", cfg.llm, "stub:echo | stub:oracle-demo | stub:fixed-script=<file> | http | http:<url>");
  sub->add_option("--llm-log", cfg.llm_log, "Append an audit record per LLM call to this file");
  sub->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent LLM call limit")->check(CLI::PositiveNumber);
  sub->add_option("--temperature", cfg.inference.temperature, "Sampling temperature")->check(CLI::NonNegativeNumber);
}

void add_inference(CLI::App* sub, hicl::RunConfig& cfg, Flags& flags) {
  sub->add_option("-k,--k", cfg.inference.k, "Demonstrations per query")->check(CLI::PositiveNumber);
  sub->add_flag("--no-iterative", flags.no_iterative, "One prompt over full label paths");
  sub->add_flag("--no-demos", flags.no_demos, "Omit demonstration blocks");
  sub->add_flag("--no-pruning", flags.no_pruning, "Offer all children as candidates");
  sub->add_flag("--no-candidate-set", flags.no_candidate_set, "Ask for the most similar demo instead");
  sub->add_flag("--per-level-retrieval", cfg.inference.per_level_retrieval, "Re-rank demos inside the current subtree");
  sub->add_option("--fallback", flags.fallback, "Fallback policy: top-ranked | consistent");
  sub->add_option("--diversity", flags.diversity, "Demo diversity key: full-path | leaf-name");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-style in-context learning for hierarchical text classification"};
  app.set_version_flag("--version", std::string(hicl::kVersion));
  app.require_subcommand(1);

  hicl::RunConfig cfg;
  Flags flags;

  auto* synth = app.add_subcommand("synth", "Write a synthetic separable taxonomy and corpus");
  add_paths(synth, cfg);
  synth->add_option("--depth", cfg.synth.depth, "Tree depth");
  synth->add_option("--branching", cfg.synth.branching, "Children per node");
  synth->add_option("--docs-per-leaf", cfg.synth.docs_per_leaf, "Documents per leaf");
  synth->add_option("--seed", cfg.synth.seed, "Generator seed");

  auto* sample = app.add_subcommand("sample", "Few-shot sample a corpus into train and held-out files");
  add_paths(sample, cfg);
  sample->add_option("-q,--shots", cfg.few_shot.q, "Shots per label path")->check(CLI::PositiveNumber);
  sample->add_option("--seed", cfg.few_shot.seed, "Sampling seed");
  sample->add_option("--mode", flags.sampling, "balanced | imbalanced");

  auto* describe = app.add_subcommand("describe-labels", "Generate label descriptions with the LLM");
  add_paths(describe, cfg);
  add_llm(describe, cfg);
  describe->add_flag("--force", cfg.force_describe, "Regenerate stored descriptions");

  auto* train = app.add_subcommand("train-indexer", "Train the index encoder");
  add_paths(train, cfg);
  train->add_option("--lr", cfg.train_cfg.lr, "Learning rate");
  train->add_option("--epochs", cfg.train_cfg.epochs, "Epochs");
  train->add_option("--alpha", cfg.train_cfg.alpha, "Classification loss weight");
  train->add_option("--beta", cfg.train_cfg.beta, "Contrastive loss weight");
  train->add_option("--tau", cfg.train_cfg.tau, "Contrastive temperature");
  train->add_flag("--infonce", cfg.train_cfg.infonce_denominator, "Include the positive in the denominator");
  train->add_option("--dim", cfg.train_cfg.dim, "Index vector width");
  train->add_option("--seed", cfg.train_cfg.seed, "Training seed");
  train->add_option("--label-text", flags.label_text, "leaf | path | description");

  auto* build = app.add_subcommand("build-db", "Encode the training corpus into a retrieval database");
  add_paths(build, cfg);

  auto* search = app.add_subcommand("search", "Show the top-k diverse neighbours of a text");
  add_paths(search, cfg);
  search->add_option("--text", cfg.text, "Query text")->required();
  search->add_option("-k,--k", cfg.inference.k, "Results")->check(CLI::PositiveNumber);
  search->add_option("--diversity", flags.diversity, "full-path | leaf-name");

  auto* classify = app.add_subcommand("classify", "Predict label paths");
  add_paths(classify, cfg);
  add_llm(classify, cfg);
  add_inference(classify, cfg, flags);
  classify->add_option("--text", cfg.text, "Classify one text and print its trace");
  classify->add_flag("--retrieval-only", cfg.retrieval_only, "Top-1 retrieval, no LLM");
  classify->add_flag("--trace", cfg.save_trace, "Store traces in the predictions file");
  classify->add_option("--record-topk", cfg.record_topk, "Store the top-k retrieved paths per document");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  add_paths(evaluate, cfg);
  evaluate->add_option("--gold", cfg.heldout, "Gold corpus (defaults to heldout.jsonl)");

  auto* serve = app.add_subcommand("serve", "Run the annotation API");
  add_paths(serve, cfg);
  add_llm(serve, cfg);
  add_inference(serve, cfg, flags);
  serve->add_option("--tasks", cfg.tasks, "Documents to annotate (JSON lines)");
  serve->add_option("--annotations", cfg.annotation_log, "Annotation log");
  serve->add_option("--static", cfg.static_dir, "Directory with the built annotation UI");
  serve->add_option("--host", cfg.host, "Listen address");
  serve->add_option("--port", cfg.port, "Listen port");
  serve->add_flag("--append-on-annotate", cfg.append_on_annotate, "Feed annotations into the database");

  CLI11_PARSE(app, argc, argv);

  if (serve->parsed()) {
    if (const char* h = std::getenv("HICL_LISTEN_HOST"); h && serve->count("--host") == 0) cfg.host = h;
    if (const char* p = std::getenv("HICL_LISTEN_PORT"); p && serve->count("--port") == 0) cfg.port = std::atoi(p);
  }

  try {
    cfg.train_cfg.label_text_mode = hicl::parse_label_text_mode(flags.label_text);
    cfg.few_shot.mode = hicl::parse_sampling_mode(flags.sampling);
    cfg.inference.fallback = hicl::parse_fallback_policy(flags.fallback);
    if (flags.diversity == "full-path") {
      cfg.inference.diversity = hicl::DiversityKey::FullPath;
    } else if (flags.diversity == "leaf-name") {
      cfg.inference.diversity = hicl::DiversityKey::LeafName;
    } else {
      throw hicl::ConfigError("unknown diversity key '" + flags.diversity + "'");
    }
  } catch (const hicl::Error& e) {
    std::cerr << "hicl: " << e.what() << "\n";
    return 2;
  }
  cfg.inference.iterative = !flags.no_iterative;
  cfg.inference.demos = !flags.no_demos;
  cfg.inference.pruning = !flags.no_pruning;
  cfg.inference.candidate_set = !flags.no_candidate_set;

  for (CLI::App* sub : app.get_subcommands()) {
    return hicl::run_pipeline(cfg, sub->get_name(), std::cout, std::cerr);
  }
  return 64;
}
