#include "hicl/trainer.hpp"

#include <cmath>
#include <numeric>

#include "hicl/error.hpp"

namespace hicl {

AdamOptimizer::AdamOptimizer(std::size_t size, double lr, std::size_t total_steps, double beta1, double beta2,
                             double eps)
    : m_(size, 0.0), v_(size, 0.0), lr_(lr), total_steps_(total_steps), beta1_(beta1), beta2_(beta2), eps_(eps) {}

double AdamOptimizer::current_lr() const {
  if (total_steps_ == 0) return 0.0;
  return lr_ * static_cast<double>(total_steps_ - std::min(t_, total_steps_)) / static_cast<double>(total_steps_);
}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grads) {
  const double lr = current_lr();
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

TrainResult train_indexer(const std::vector<Document>& trainset, const Taxonomy& taxonomy, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
  if (trainset.empty()) throw ConfigError("train_indexer: empty training set");
  if (!(cfg.tau > 0.0)) throw ConfigError("train_indexer: tau must be positive");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw ConfigError("train_indexer: alpha and beta must be non-negative");
  if (cfg.epochs < 0) throw ConfigError("train_indexer: epochs must be non-negative");

  Rng rng(cfg.seed);
  TrainResult result{EncoderParams::initialize(EncoderShape::for_taxonomy(taxonomy, cfg.dim), rng.fork_seed()), {}};
  if (cfg.epochs == 0) return result;

  const auto similarity = DescriptionSimilarity::build(taxonomy, cfg.label_text_mode);
  const ContrastiveSampler sampler(trainset, taxonomy, similarity, cfg.label_text_mode, cfg.group_sizes);
  std::vector<std::vector<std::size_t>> gold_classes;
  for (const Document& d : trainset) gold_classes.push_back(level_classes(taxonomy, d.gold));

  EncoderParams& params = result.params;
  EncoderParams grads(params.shape());
  const std::size_t total_steps = static_cast<std::size_t>(cfg.epochs) * trainset.size();
  AdamOptimizer adam(params.values().size(), cfg.lr, total_steps, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const LossWeights weights{cfg.alpha, cfg.beta};
  const ContrastiveOptions copts{cfg.tau, cfg.infonce_denominator};

  std::vector<std::size_t> order(trainset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats{epoch, 0, 0, 0, 0};
    for (std::size_t idx : order) {
      ContrastiveGroup group = sampler.select(idx, rng);
      auto masked = choose_mask(trainset[idx].tokens.size(), cfg.mask_rate, rng);
      grads.set_zero();
      LossBreakdown loss = total_loss(group, gold_classes[idx], masked, params, weights, copts, &grads);
      if (!std::isfinite(loss.total)) {
        throw NumericError("train_indexer: non-finite loss at epoch " + std::to_string(epoch) + " on document '" +
                           trainset[idx].id + "'");
      }
      adam.step(params.values(), grads.values());
      stats.mean_total += loss.total;
      stats.mean_mlm += loss.mlm;
      stats.mean_cls += loss.cls;
      stats.mean_con += loss.con;
    }
    const double inv = 1.0 / static_cast<double>(trainset.size());
    stats.mean_total *= inv;
    stats.mean_mlm *= inv;
    stats.mean_cls *= inv;
    stats.mean_con *= inv;
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  if (!params.all_finite()) throw NumericError("train_indexer: parameters diverged");
  params.quantize();
  return result;
}

}  // namespace hicl
