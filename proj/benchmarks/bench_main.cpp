#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "hicl/contrastive.hpp"
#include "hicl/encoder.hpp"
#include "hicl/losses.hpp"
#include "hicl/retrieval.hpp"
#include "hicl/rng.hpp"

using namespace hicl;

namespace {

EncoderShape bench_shape(std::size_t dim, int depth) {
  EncoderShape s;
  s.dim = dim;
  s.level_widths.assign(static_cast<std::size_t>(depth), 8);
  return s;
}

std::vector<TokenId> random_tokens(Rng& rng, std::size_t n) {
  std::vector<TokenId> out(n);
  for (auto& t : out) t = static_cast<TokenId>(rng.uniform_index(kVocabSize));
  return out;
}

GroupMember member(Rng& rng, std::size_t n) {
  GroupMember m;
  m.source = "m";
  m.tokens = random_tokens(rng, n);
  return m;
}

void bm_encode(benchmark::State& state) {
  const auto tokens_per_doc = static_cast<std::size_t>(state.range(0));
  EncoderParams p = EncoderParams::initialize(bench_shape(64, 3), 1);
  Rng rng(2);
  auto tokens = random_tokens(rng, tokens_per_doc);
  for (auto _ : state) {
    auto out = encode(tokens, p);
    benchmark::DoNotOptimize(out);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_encode)->Arg(32)->Arg(256)->Arg(2048);

RetrievalDatabase random_db(std::size_t n, int depth, std::size_t dim, std::size_t paths, Rng& rng) {
  RetrievalDatabase db(depth, dim, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(static_cast<std::size_t>(depth) * dim);
    for (float& x : v) x = static_cast<float>(rng.uniform_real(-1, 1));
    LabelPath path;
    const auto p = static_cast<NodeId>(rng.uniform_index(paths));
    for (int j = 0; j < depth; ++j) path.nodes.push_back(1 + p * 10 + static_cast<NodeId>(j));
    db.add("d" + std::to_string(i), std::move(v), path);
  }
  return db;
}

void bm_search_topk(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  RetrievalDatabase db = random_db(n, 3, 64, 27, rng);
  std::vector<float> q(3 * 64);
  for (float& x : q) x = static_cast<float>(rng.uniform_real(-1, 1));
  for (auto _ : state) {
    auto top = search_topk_diverse(db, q, 3);
    benchmark::DoNotOptimize(top);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_search_topk)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

void bm_total_loss_step(benchmark::State& state) {
  EncoderParams p = EncoderParams::initialize(bench_shape(64, 3), 4);
  EncoderParams grads(p.shape());
  Rng rng(5);
  ContrastiveGroup g;
  g.anchor = member(rng, 128);
  g.positive = member(rng, 128);
  for (int i = 0; i < 3; ++i) g.hard_negatives.push_back(member(rng, 128));
  for (int i = 0; i < 6; ++i) g.random_negatives.push_back(member(rng, 128));
  std::vector<std::size_t> gold{1, 2, 3};
  auto masked = choose_mask(g.anchor.tokens.size(), 0.15, rng);
  for (auto _ : state) {
    grads.set_zero();
    auto loss = total_loss(g, gold, masked, p, LossWeights{}, ContrastiveOptions{}, &grads);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(bm_total_loss_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
