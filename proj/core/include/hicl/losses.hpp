#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/rng.hpp"

namespace hicl {

struct ContrastiveGroup;

/// Positions to mask: ceil(rate * n) distinct positions, capped at n - 1 so
/// at least one token stays visible. Sorted ascending.
std::vector<std::size_t> choose_mask(std::size_t n, double rate, Rng& rng);

/// Masked-token prediction with weight tying. The visible tokens are
/// mean-pooled into t_rest; every masked position is predicted by a softmax
/// over the vocabulary with logits E * t_rest. Returns the mean
/// cross-entropy over masked positions and, when `grads` is set, adds
/// scale * dL/dtheta into it.
double mlm_loss(std::span<const TokenId> tokens, std::span<const std::size_t> masked, const EncoderParams& params,
                EncoderParams* grads = nullptr, double scale = 1.0);

/// Per-level softmax cross-entropy of W_j m_j against the gold class index
/// at each level, summed over levels.
double cls_loss(std::span<const TokenId> tokens, std::span<const std::size_t> gold_classes,
                const EncoderParams& params, EncoderParams* grads = nullptr, double scale = 1.0);

/// Gold class index (position within the level) for each level of a path.
std::vector<std::size_t> level_classes(const Taxonomy& taxonomy, const LabelPath& path);

struct ContrastiveOptions {
  double tau = 0.1;
  /// Adds the positive pair to the denominator (standard InfoNCE). Off by
  /// default: the denominator sums over negatives only.
  bool infonce_denominator = false;
};

/// Contrastive term for one level given precomputed cosines:
///   -log( exp(cos_pos / tau) / sum_k exp(cos_neg_k / tau) )
double contrastive_term(double cos_pos, std::span<const double> cos_negs, const ContrastiveOptions& opts);

/// Sum over levels of contrastive_term on the anchor's index vectors.
/// Throws NumericError naming the member when a vector has zero norm.
double dcl_loss(const ContrastiveGroup& group, const EncoderParams& params, const ContrastiveOptions& opts,
                EncoderParams* grads = nullptr, double scale = 1.0);

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.01;
};

struct LossBreakdown {
  double mlm = 0.0;
  double cls = 0.0;
  double con = 0.0;
  double total = 0.0;
};

/// L = L_mlm + alpha * L_cls + beta * L_con on the group's anchor. The MLM
/// term is skipped (0) for single-token anchors.
LossBreakdown total_loss(const ContrastiveGroup& group, std::span<const std::size_t> gold_classes,
                         std::span<const std::size_t> masked, const EncoderParams& params, const LossWeights& weights,
                         const ContrastiveOptions& opts, EncoderParams* grads = nullptr);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace hicl
