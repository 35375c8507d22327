#include "hicl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hicl/contrastive.hpp"
#include "hicl/error.hpp"

namespace hicl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double log_sum_exp(std::span<const double> xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Adds g * d cos(u, v) / du to du, where cos = c, |u| = nu, |v| = nv.
void add_cosine_grad(std::span<const double> u, std::span<const double> v, double c, double nu, double nv, double g,
                     std::vector<double>& du) {
  const double inv_uv = 1.0 / (nu * nv);
  const double inv_uu = c / (nu * nu);
  for (std::size_t i = 0; i < u.size(); ++i) du[i] += g * (v[i] * inv_uv - u[i] * inv_uu);
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine of a zero-norm vector");
  return dot(a, b) / (na * nb);
}

std::vector<std::size_t> choose_mask(std::size_t n, double rate, Rng& rng) {
  if (n < 2) return {};
  auto count = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));
  count = std::clamp<std::size_t>(count, 1, n - 1);
  auto picked = rng.sample_indices(n, count);
  std::sort(picked.begin(), picked.end());
  return picked;
}

double mlm_loss(std::span<const TokenId> tokens, std::span<const std::size_t> masked, const EncoderParams& params,
                EncoderParams* grads, double scale) {
  if (masked.empty()) return 0.0;
  const std::size_t n = tokens.size();
  if (masked.size() >= n) throw ConfigError("mlm_loss: at least one token must stay unmasked");
  const std::size_t d = params.dim();
  const std::size_t vocab = params.shape().vocab;

  std::vector<bool> is_masked(n, false);
  for (std::size_t p : masked) {
    if (p >= n) throw ConfigError("mlm_loss: mask position out of range");
    is_masked[p] = true;
  }
  std::vector<TokenId> visible;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_masked[i]) visible.push_back(tokens[i]);
  }
  const double inv_visible = 1.0 / static_cast<double>(visible.size());
  std::vector<double> t_rest(d, 0.0);
  for (TokenId tok : visible) {
    auto row = params.embedding(tok);
    for (std::size_t k = 0; k < d; ++k) t_rest[k] += row[k];
  }
  for (double& v : t_rest) v *= inv_visible;

  // Every masked position sees the same context, so one softmax serves all.
  std::vector<double> logits(vocab);
  const auto table = params.embeddings();
  for (std::size_t v = 0; v < vocab; ++v) logits[v] = dot({table.data() + v * d, d}, t_rest);
  const double lse = log_sum_exp(logits);

  std::unordered_map<TokenId, double> target_count;
  const double inv_m = 1.0 / static_cast<double>(masked.size());
  double loss = 0.0;
  for (std::size_t p : masked) {
    loss += lse - logits[tokens[p]];
    target_count[tokens[p]] += inv_m;
  }
  loss *= inv_m;

  if (grads) {
    auto gtable = grads->embeddings();
    std::vector<double> d_rest(d, 0.0);
    for (std::size_t v = 0; v < vocab; ++v) {
      double g = std::exp(logits[v] - lse);
      if (auto it = target_count.find(static_cast<TokenId>(v)); it != target_count.end()) g -= it->second;
      const double* row = table.data() + v * d;
      double* grow = gtable.data() + v * d;
      for (std::size_t k = 0; k < d; ++k) {
        grow[k] += scale * g * t_rest[k];
        d_rest[k] += g * row[k];
      }
    }
    for (TokenId tok : visible) {
      auto ge = grads->embedding(tok);
      for (std::size_t k = 0; k < d; ++k) ge[k] += scale * d_rest[k] * inv_visible;
    }
  }
  return loss;
}

std::vector<std::size_t> level_classes(const Taxonomy& taxonomy, const LabelPath& path) {
  std::vector<std::size_t> out;
  for (NodeId id : path.nodes) out.push_back(taxonomy.index_in_level(id));
  return out;
}

double cls_loss(std::span<const TokenId> tokens, std::span<const std::size_t> gold_classes,
                const EncoderParams& params, EncoderParams* grads, double scale) {
  const int depth = params.depth();
  if (gold_classes.size() != static_cast<std::size_t>(depth)) {
    throw ConfigError("cls_loss: got " + std::to_string(gold_classes.size()) + " gold classes for depth " +
                      std::to_string(depth));
  }
  const std::size_t d = params.dim();
  EncoderOutput out = encode(tokens, params);
  std::vector<std::vector<double>> d_index(static_cast<std::size_t>(depth), std::vector<double>(d, 0.0));
  double loss = 0.0;
  for (int j = 1; j <= depth; ++j) {
    const std::size_t width = params.shape().level_widths[static_cast<std::size_t>(j - 1)];
    const std::size_t gold = gold_classes[static_cast<std::size_t>(j - 1)];
    if (gold >= width) throw ConfigError("cls_loss: gold class out of range at level " + std::to_string(j));
    const auto& m = out.index[static_cast<std::size_t>(j - 1)];
    auto w = params.head(j);
    std::vector<double> logits(width);
    for (std::size_t c = 0; c < width; ++c) logits[c] = dot({w.data() + c * d, d}, m);
    const double lse = log_sum_exp(logits);
    loss += lse - logits[gold];
    if (!grads) continue;
    auto gw = grads->head(j);
    auto& dm = d_index[static_cast<std::size_t>(j - 1)];
    for (std::size_t c = 0; c < width; ++c) {
      const double g = std::exp(logits[c] - lse) - (c == gold ? 1.0 : 0.0);
      const double* wrow = w.data() + c * d;
      double* gwrow = gw.data() + c * d;
      for (std::size_t k = 0; k < d; ++k) {
        gwrow[k] += scale * g * m[k];
        dm[k] += g * wrow[k];
      }
    }
  }
  if (grads) backward_encode(tokens, out, d_index, params, *grads, scale);
  return loss;
}

double contrastive_term(double cos_pos, std::span<const double> cos_negs, const ContrastiveOptions& opts) {
  if (!(opts.tau > 0.0)) throw ConfigError("contrastive temperature must be positive");
  if (cos_negs.empty()) throw ConfigError("contrastive term needs at least one negative");
  std::vector<double> terms;
  for (double c : cos_negs) terms.push_back(c / opts.tau);
  if (opts.infonce_denominator) terms.push_back(cos_pos / opts.tau);
  return -(cos_pos / opts.tau) + log_sum_exp(terms);
}

double dcl_loss(const ContrastiveGroup& group, const EncoderParams& params, const ContrastiveOptions& opts,
                EncoderParams* grads, double scale) {
  if (!(opts.tau > 0.0)) throw ConfigError("contrastive temperature must be positive");
  const auto negatives = group.negatives();
  if (negatives.empty()) throw ConfigError("contrastive group has no negatives");

  std::vector<const GroupMember*> members{&group.anchor, &group.positive};
  members.insert(members.end(), negatives.begin(), negatives.end());

  const int depth = params.depth();
  const std::size_t d = params.dim();
  std::vector<EncoderOutput> outs;
  outs.reserve(members.size());
  for (const GroupMember* m : members) outs.push_back(encode(m->tokens, params));

  // norms[member][level]
  std::vector<std::vector<double>> norms(members.size(), std::vector<double>(static_cast<std::size_t>(depth)));
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (int j = 0; j < depth; ++j) {
      const double nv = norm(outs[i].index[static_cast<std::size_t>(j)]);
      if (nv == 0.0) {
        throw NumericError("contrastive loss: zero-norm index vector at level " + std::to_string(j + 1) +
                           " for member '" + members[i]->source + "'");
      }
      norms[i][static_cast<std::size_t>(j)] = nv;
    }
  }

  std::vector<std::vector<std::vector<double>>> d_index;
  if (grads) {
    d_index.assign(members.size(),
                   std::vector<std::vector<double>>(static_cast<std::size_t>(depth), std::vector<double>(d, 0.0)));
  }

  const std::size_t n_neg = negatives.size();
  double loss = 0.0;
  for (std::size_t j = 0; j < static_cast<std::size_t>(depth); ++j) {
    const auto& a = outs[0].index[j];
    std::vector<double> cos(members.size(), 0.0);
    for (std::size_t i = 1; i < members.size(); ++i) {
      cos[i] = dot(a, outs[i].index[j]) / (norms[0][j] * norms[i][j]);
    }
    std::span<const double> cos_negs(cos.data() + 2, n_neg);
    loss += contrastive_term(cos[1], cos_negs, opts);
    if (!grads) continue;

    // Softmax weights over the denominator terms.
    std::vector<double> z;
    for (double c : cos_negs) z.push_back(c / opts.tau);
    if (opts.infonce_denominator) z.push_back(cos[1] / opts.tau);
    const double lse = log_sum_exp(z);

    std::vector<double> dcos(members.size(), 0.0);
    dcos[1] = -1.0 / opts.tau;
    if (opts.infonce_denominator) dcos[1] += std::exp(z.back() - lse) / opts.tau;
    for (std::size_t k = 0; k < n_neg; ++k) dcos[2 + k] = std::exp(z[k] - lse) / opts.tau;

    for (std::size_t i = 1; i < members.size(); ++i) {
      const auto& b = outs[i].index[j];
      add_cosine_grad(a, b, cos[i], norms[0][j], norms[i][j], dcos[i], d_index[0][j]);
      add_cosine_grad(b, a, cos[i], norms[i][j], norms[0][j], dcos[i], d_index[i][j]);
    }
  }
  if (grads) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      backward_encode(members[i]->tokens, outs[i], d_index[i], params, *grads, scale);
    }
  }
  return loss;
}

LossBreakdown total_loss(const ContrastiveGroup& group, std::span<const std::size_t> gold_classes,
                         std::span<const std::size_t> masked, const EncoderParams& params, const LossWeights& weights,
                         const ContrastiveOptions& opts, EncoderParams* grads) {
  if (weights.alpha < 0.0 || weights.beta < 0.0) throw ConfigError("loss weights must be non-negative");
  LossBreakdown out;
  const auto& tokens = group.anchor.tokens;
  if (tokens.size() >= 2) out.mlm = mlm_loss(tokens, masked, params, grads, 1.0);
  if (weights.alpha != 0.0) out.cls = cls_loss(tokens, gold_classes, params, grads, weights.alpha);
  if (weights.beta != 0.0) out.con = dcl_loss(group, params, opts, grads, weights.beta);
  out.total = out.mlm + weights.alpha * out.cls + weights.beta * out.con;
  return out;
}

}  // namespace hicl
