#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hicl/contrastive.hpp"
#include "hicl/corpus.hpp"
#include "hicl/encoder.hpp"
#include "hicl/losses.hpp"

namespace hicl {

struct TrainConfig {
  double lr = 5e-5;
  int epochs = 20;
  double alpha = 1.0;
  double beta = 0.01;
  double tau = 0.1;
  bool infonce_denominator = false;
  double mask_rate = 0.15;
  std::uint64_t seed = 171;
  std::size_t dim = 64;
  LabelTextMode label_text_mode = LabelTextMode::Description;
  GroupSizes group_sizes{};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochStats {
  int epoch = 0;
  double mean_total = 0.0;
  double mean_mlm = 0.0;
  double mean_cls = 0.0;
  double mean_con = 0.0;
};

struct TrainResult {
  EncoderParams params;
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam over one contrastive group per step, anchors visited in a
/// seed-shuffled order each epoch. Learning rate decays linearly from `lr`
/// to 0 over epochs * |trainset| steps, no warmup. Throws NumericError on a
/// non-finite loss. The returned params are rounded to float32.
TrainResult train_indexer(const std::vector<Document>& trainset, const Taxonomy& taxonomy, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

/// Adam with a linearly decaying step size.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double lr, std::size_t total_steps, double beta1, double beta2, double eps);

  void step(std::span<double> params, std::span<const double> grads);
  double current_lr() const;
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double lr_;
  std::size_t total_steps_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

}  // namespace hicl
