#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "hicl/contrastive.hpp"
#include "hicl/encoder.hpp"
#include "hicl/error.hpp"
#include "hicl/grad_check.hpp"
#include "hicl/io.hpp"
#include "hicl/losses.hpp"
#include "hicl/trainer.hpp"
#include "test_util.hpp"

using namespace hicl;

namespace {

/// Straightforward re-derivation of the forward pass for comparison.
std::vector<std::vector<double>> reference_index(const std::vector<TokenId>& tokens, const EncoderParams& p) {
  const std::size_t d = p.dim();
  std::vector<double> t(d, 0.0);
  for (TokenId tok : tokens) {
    for (std::size_t i = 0; i < d; ++i) t[i] += p.embeddings()[tok * d + i];
  }
  for (double& v : t) v /= static_cast<double>(tokens.size());
  std::vector<std::vector<double>> out;
  for (int j = 1; j <= p.depth(); ++j) {
    std::vector<double> m(d);
    for (std::size_t r = 0; r < d; ++r) {
      double z = p.bias(j)[r];
      for (std::size_t c = 0; c < d; ++c) z += p.projection(j)[r * d + c] * t[c];
      m[r] = std::tanh(z);
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace

TEST(Encoder, ShapeAndLayout) {
  auto shape = test::tiny_shape();
  EXPECT_EQ(shape.parameter_count(), 40u * 6 + 2 * (36 + 6) + (2 + 4) * 6);
  EncoderParams p(shape);
  EXPECT_EQ(p.values().size(), shape.parameter_count());
  EXPECT_EQ(p.projection(2).size(), 36u);
  EXPECT_EQ(p.head(2).size(), 24u);
  EXPECT_THROW(p.projection(3), NotFoundError);
  Taxonomy tax = test::small_taxonomy();
  auto ts = EncoderShape::for_taxonomy(tax, 16);
  EXPECT_EQ(ts.vocab, kVocabSize);
  EXPECT_EQ(ts.level_widths, (std::vector<std::size_t>{2, 4}));
}

TEST(Encoder, ForwardMatchesReference) {
  auto p = test::tiny_params(4);
  std::vector<TokenId> tokens{3, 17, 3, 39};
  auto out = encode(tokens, p);
  auto ref = reference_index(tokens, p);
  ASSERT_EQ(out.index.size(), 2u);
  for (int j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out.index[j][i], ref[j][i], 1e-14);
  }
  auto vec = index_vectors(out);
  ASSERT_EQ(vec.size(), 12u);
  EXPECT_EQ(vec[7], static_cast<float>(out.index[1][1]));
  EXPECT_THROW(encode(std::vector<TokenId>{}, p), ConfigError);
  EXPECT_THROW(encode(std::vector<TokenId>{40}, p), ConfigError);
}

TEST(Encoder, InitIsSeededAndFloatExact) {
  auto shape = test::tiny_shape();
  auto a = EncoderParams::initialize(shape, 9);
  auto b = EncoderParams::initialize(shape, 9);
  auto c = EncoderParams::initialize(shape, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (double v : a.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  for (double v : a.bias(1)) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, ParamsFileRoundTripIsBitwise) {
  test::TempDir dir;
  auto p = EncoderParams::initialize(test::tiny_shape(), 2);
  save_params(dir / "p.bin", p);
  EncoderParams back = load_params(dir / "p.bin");
  EXPECT_EQ(back, p);
  EXPECT_EQ(serialize_params(back), serialize_params(p));
}

TEST(Encoder, ParamsFileCorruptionRejected) {
  auto p = EncoderParams::initialize(test::tiny_shape(), 2);
  std::string bytes = serialize_params(p);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize_params(flipped), FormatError);
  EXPECT_THROW(deserialize_params(bytes.substr(0, bytes.size() - 9)), FormatError);
  EXPECT_THROW(deserialize_params("HPRM"), FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_params(magic), FormatError);
}

TEST(Losses, ContrastiveTermClosedForm) {
  ContrastiveOptions opts;
  opts.tau = 0.5;
  std::vector<double> negs{0.0};
  EXPECT_NEAR(contrastive_term(1.0, negs, opts), -2.0, 1e-12);
  opts.infonce_denominator = true;
  EXPECT_NEAR(contrastive_term(1.0, negs, opts), -2.0 + std::log(std::exp(2.0) + 1.0), 1e-12);
  opts.tau = 0.1;
  opts.infonce_denominator = false;
  std::vector<double> two{0.5, -0.5};
  EXPECT_NEAR(contrastive_term(0.3, two, opts), -3.0 + std::log(std::exp(5.0) + std::exp(-5.0)), 1e-12);
  EXPECT_THROW(contrastive_term(1.0, std::vector<double>{}, opts), ConfigError);
  opts.tau = 0.0;
  EXPECT_THROW(contrastive_term(1.0, negs, opts), ConfigError);
}

TEST(Losses, ClsValueMatchesSoftmax) {
  auto p = test::tiny_params(5);
  std::vector<TokenId> tokens{1, 2, 3};
  std::vector<std::size_t> gold{1, 3};
  auto ref = reference_index(tokens, p);
  double expected = 0.0;
  const std::vector<std::size_t> widths{2, 4};
  for (int j = 0; j < 2; ++j) {
    std::vector<double> logits(widths[j]);
    for (std::size_t c = 0; c < widths[j]; ++c) {
      for (std::size_t i = 0; i < 6; ++i) logits[c] += p.head(j + 1)[c * 6 + i] * ref[j][i];
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    expected += std::log(z) - logits[gold[j]];
  }
  EXPECT_NEAR(cls_loss(tokens, gold, p), expected, 1e-12);
  EXPECT_THROW(cls_loss(tokens, std::vector<std::size_t>{1}, p), ConfigError);
  EXPECT_THROW(cls_loss(tokens, std::vector<std::size_t>{2, 0}, p), ConfigError);
}

TEST(Losses, DclValueMatchesCosines) {
  auto p = test::tiny_params(6);
  auto g = test::random_group(11);
  ContrastiveOptions opts;
  double expected = 0.0;
  auto a = reference_index(g.anchor.tokens, p);
  auto pos = reference_index(g.positive.tokens, p);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> negs;
    for (const GroupMember* m : g.negatives()) negs.push_back(cosine(a[j], reference_index(m->tokens, p)[j]));
    expected += contrastive_term(cosine(a[j], pos[j]), negs, opts);
  }
  EXPECT_NEAR(dcl_loss(g, p, opts), expected, 1e-12);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto p = test::tiny_params(seed);
    auto g = test::random_group(seed * 31);
    std::vector<std::size_t> gold{seed % 2, seed % 4};
    std::vector<std::size_t> masked{0};
    for (bool infonce : {false, true}) {
      ContrastiveOptions opts;
      opts.infonce_denominator = infonce;
      auto dcl = check_gradients([&](const EncoderParams& q, EncoderParams* gr) { return dcl_loss(g, q, opts, gr); }, p);
      EXPECT_LE(dcl.max_relative_error, 1e-4) << "dcl seed " << seed << " coord " << dcl.worst_coordinate;
    }
    auto cls = check_gradients(
        [&](const EncoderParams& q, EncoderParams* gr) { return cls_loss(g.anchor.tokens, gold, q, gr); }, p);
    EXPECT_LE(cls.max_relative_error, 1e-4) << "cls seed " << seed;
    auto mlm = check_gradients(
        [&](const EncoderParams& q, EncoderParams* gr) { return mlm_loss(g.anchor.tokens, masked, q, gr); }, p);
    EXPECT_LE(mlm.max_relative_error, 1e-4) << "mlm seed " << seed;
    auto total = check_gradients(
        [&](const EncoderParams& q, EncoderParams* gr) {
          return total_loss(g, gold, masked, q, LossWeights{0.7, 0.3}, ContrastiveOptions{}, gr).total;
        },
        p);
    EXPECT_LE(total.max_relative_error, 1e-4) << "total seed " << seed;
    EXPECT_EQ(total.checked, p.values().size());
  }
}

TEST(Losses, TotalIsWeightedSum) {
  auto p = test::tiny_params(8);
  auto g = test::random_group(8);
  std::vector<std::size_t> gold{0, 2};
  std::vector<std::size_t> masked{1};
  LossWeights w{0.5, 2.0};
  auto b = total_loss(g, gold, masked, p, w, ContrastiveOptions{});
  EXPECT_NEAR(b.mlm, mlm_loss(g.anchor.tokens, masked, p), 1e-12);
  EXPECT_NEAR(b.cls, cls_loss(g.anchor.tokens, gold, p), 1e-12);
  EXPECT_NEAR(b.con, dcl_loss(g, p, ContrastiveOptions{}), 1e-12);
  EXPECT_NEAR(b.total, b.mlm + 0.5 * b.cls + 2.0 * b.con, 1e-12);
  EXPECT_THROW(total_loss(g, gold, masked, p, LossWeights{-1, 0}, ContrastiveOptions{}), ConfigError);
}

TEST(Losses, SingleTokenAnchorSkipsMlm) {
  auto p = test::tiny_params(8);
  auto g = test::random_group(8);
  g.anchor.tokens = {5};
  auto b = total_loss(g, std::vector<std::size_t>{0, 0}, std::vector<std::size_t>{}, p, LossWeights{}, ContrastiveOptions{});
  EXPECT_EQ(b.mlm, 0.0);
}

TEST(Losses, ZeroNormVectorNamesMember) {
  auto p = test::tiny_params(3);
  for (int j = 1; j <= 2; ++j) {
    for (double& v : p.bias(j)) v = 0.0;
  }
  for (double& v : p.embedding(7)) v = 0.0;
  auto g = test::random_group(3);
  g.hard_negatives[0].tokens = {7, 7};
  try {
    dcl_loss(g, p, ContrastiveOptions{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("hard"), std::string::npos) << e.what();
  }
}

TEST(Losses, MaskChoice) {
  Rng rng(1);
  auto m = choose_mask(10, 0.5, rng);
  EXPECT_EQ(m.size(), 5u);
  EXPECT_EQ(choose_mask(10, 0.01, rng).size(), 1u);
  EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
  EXPECT_EQ(choose_mask(2, 0.9, rng).size(), 1u);
  EXPECT_TRUE(choose_mask(1, 0.5, rng).empty());
}

TEST(GradCheck, DetectsWrongGradient) {
  auto p = test::tiny_params(1);
  auto report = check_gradients(
      [](const EncoderParams& q, EncoderParams* g) {
        double s = 0.0;
        for (double v : q.values()) s += v * v;
        if (g) {
          for (std::size_t i = 0; i < q.values().size(); ++i) g->values()[i] += 3.0 * q.values()[i];
        }
        return s;
      },
      p);
  EXPECT_GT(report.max_relative_error, 0.1);
}

TEST(GradCheck, FourthOrderStencilIsExactOnQuartics) {
  auto p = test::tiny_params(2);
  // sum v^4 has third derivative 24v: the two-point stencil is off by 4h^2 v,
  // the five-point one only by roundoff
  auto quartic = [](const EncoderParams& q, EncoderParams* g) {
    double s = 0.0;
    for (double v : q.values()) s += v * v * v * v;
    if (g) {
      for (std::size_t i = 0; i < q.values().size(); ++i) g->values()[i] += 4.0 * std::pow(q.values()[i], 3);
    }
    return s;
  };
  GradCheckOptions two;
  two.step = 1e-2;
  GradCheckOptions five = two;
  five.fourth_order = true;
  EXPECT_GT(check_gradients(quartic, p, two).max_relative_error, 1e-3);
  EXPECT_LT(check_gradients(quartic, p, five).max_relative_error, 1e-6);
}

namespace {

std::vector<Document> tiny_trainset(const Taxonomy& tax) {
  return {test::make_doc(tax, "a", "neural network training loss", {"CS", "ML"}),
          test::make_doc(tax, "b", "gradient descent model fit", {"CS", "ML"}),
          test::make_doc(tax, "c", "sql index query planner", {"CS", "DB"}),
          test::make_doc(tax, "d", "gene allele mutation trait", {"Bio", "Genetics"}),
          test::make_doc(tax, "e", "forest species habitat river", {"Bio", "Ecology"})};
}

}  // namespace

TEST(Contrastive, GroupComposition) {
  Taxonomy tax = test::small_taxonomy();
  auto train = tiny_trainset(tax);
  auto sim = build_desc_similarity(tax, LabelTextMode::Description);
  EXPECT_NEAR(sim.similarity(3, 3), 1.0, 1e-12);
  EXPECT_EQ(sim.similarity(3, 4), sim.similarity(4, 3));
  EXPECT_EQ(sim.top(3).size(), 3u);
  ContrastiveSampler sampler(train, tax, sim, LabelTextMode::Description, GroupSizes{2, 3});
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto g0 = sampler.select(0, rng);
    EXPECT_EQ(g0.anchor.source, "a");
    EXPECT_EQ(g0.positive.source, "b");
    EXPECT_EQ(g0.hard_negatives.size(), 2u);
    EXPECT_EQ(g0.random_negatives.size(), 3u);
    EXPECT_EQ(g0.size(), 7u);
    for (const auto* m : g0.negatives()) EXPECT_NE(m->path, train[0].gold);
    auto g2 = sampler.select(2, rng);
    EXPECT_TRUE(g2.positive.is_label_text);
    EXPECT_EQ(g2.positive.source, "label:CS/DB");
    EXPECT_EQ(g2.positive.path, train[2].gold);
  }
  EXPECT_THROW(sampler.select(99, rng), NotFoundError);
  EXPECT_NEAR(bag_of_tokens_cosine("a b", "b a"), 1.0, 1e-12);
  EXPECT_NEAR(bag_of_tokens_cosine("a a b", "a c"), 2.0 / (std::sqrt(5.0) * std::sqrt(2.0)), 1e-12);
}

TEST(Trainer, AdamMatchesHandFormula) {
  AdamOptimizer adam(1, 0.1, 4, 0.9, 0.999, 1e-8);
  std::vector<double> x{1.0};
  const std::vector<double> grads{0.5, -0.2, 0.3};
  double m = 0, v = 0, expected = 1.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    double lr = 0.1 * static_cast<double>(4 - (t - 1)) / 4.0;
    EXPECT_NEAR(adam.current_lr(), lr, 1e-15);
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    double mh = m / (1 - std::pow(0.9, t));
    double vh = v / (1 - std::pow(0.999, t));
    expected -= lr * mh / (std::sqrt(vh) + 1e-8);
    std::vector<double> g{grads[t - 1]};
    adam.step(x, g);
    EXPECT_NEAR(x[0], expected, 1e-15);
  }
  EXPECT_EQ(adam.steps_taken(), 3u);
}

TEST(Trainer, ZeroEpochsReturnsInit) {
  Taxonomy tax = test::small_taxonomy();
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 0;
  auto r = train_indexer(tiny_trainset(tax), tax, cfg);
  Rng rng(cfg.seed);
  EXPECT_EQ(r.params, EncoderParams::initialize(EncoderShape::for_taxonomy(tax, 8), rng.fork_seed()));
  EXPECT_TRUE(r.epochs.empty());
}

TEST(Trainer, DeterministicAndLossFalls) {
  Taxonomy tax = test::small_taxonomy();
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 6;
  cfg.lr = 1e-2;
  cfg.group_sizes = {2, 2};
  std::vector<EpochStats> seen;
  auto a = train_indexer(tiny_trainset(tax), tax, cfg, [&](const EpochStats& s) { seen.push_back(s); });
  auto b = train_indexer(tiny_trainset(tax), tax, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(serialize_params(a.params), serialize_params(b.params));
  ASSERT_EQ(seen.size(), 6u);
  EXPECT_EQ(seen[5].epoch, 6);
  EXPECT_LT(a.epochs.back().mean_total, a.epochs.front().mean_total);
  for (const auto& s : a.epochs) {
    EXPECT_NEAR(s.mean_total, s.mean_mlm + cfg.alpha * s.mean_cls + cfg.beta * s.mean_con, 1e-9);
  }
  cfg.seed = 172;
  auto c = train_indexer(tiny_trainset(tax), tax, cfg);
  EXPECT_NE(a.params, c.params);
}

TEST(Trainer, RejectsBadConfig) {
  Taxonomy tax = test::small_taxonomy();
  TrainConfig cfg;
  cfg.tau = 0;
  EXPECT_THROW(train_indexer(tiny_trainset(tax), tax, cfg), ConfigError);
  cfg = TrainConfig{};
  EXPECT_THROW(train_indexer({}, tax, cfg), ConfigError);
}
