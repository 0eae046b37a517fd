#include "cptuning/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cptuning/decoding.hpp"
#include "cptuning/errors.hpp"
#include "cptuning/evaluation.hpp"

namespace cptuning {

std::vector<double> lbls_distribution(const Vocab& tokens, const RelationTrie& trie,
                                      const TokenList& gold, std::size_t position,
                                      double beta, SmoothingSupport support) {
  if (position < 1 || position > gold.size()) {
    throw BoundsError("lbls position " + std::to_string(position) + " outside [1, " +
                      std::to_string(gold.size()) + "]");
  }
  if (beta < 0.0 || beta >= 1.0) throw ConfigError("beta must be in [0, 1)");

  const Token& gold_token = gold[position - 1];
  int gold_id = tokens.lookup(gold_token);
  if (gold_id < 0) throw ConfigError("gold token '" + gold_token + "' not in vocabulary");

  std::set<Token> support_set;
  if (support == SmoothingSupport::layer) {
    support_set = trie.layer_tokens(static_cast<int>(position));
  } else {
    TokenList parent(gold.begin(), gold.begin() + static_cast<std::ptrdiff_t>(position - 1));
    support_set = trie.allowed_next(parent);
  }

  std::vector<double> dist(tokens.size(), 0.0);
  if (support_set.size() <= 1 || beta == 0.0) {
    dist[static_cast<std::size_t>(gold_id)] = 1.0;
    return dist;
  }
  const double share = beta / static_cast<double>(support_set.size() - 1);
  for (const Token& t : support_set) {
    int id = tokens.lookup(t);
    if (id < 0) throw ConfigError("support token '" + t + "' not in vocabulary");
    dist[static_cast<std::size_t>(id)] = (t == gold_token) ? 1.0 - beta : share;
  }
  return dist;
}

double lbls_loss(const std::vector<std::vector<double>>& steps, const TokenList& gold,
                 const Vocab& tokens, const RelationTrie& trie, double beta,
                 SmoothingSupport support) {
  if (gold.empty() || gold.back() != kSentinelEnd) {
    throw ConstraintError("gold relation must end with " + kSentinelEnd);
  }
  if (steps.size() != gold.size()) {
    throw ConstraintError("lbls_loss: step count does not match gold length");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto target = lbls_distribution(tokens, trie, gold, i + 1, beta, support);
    for (std::size_t j = 0; j < target.size(); ++j) {
      if (target[j] != 0.0) loss -= target[j] * steps[i][j];
    }
  }
  if (!std::isfinite(loss)) throw NumericError("lbls_loss is non-finite");
  return loss;
}

double ce_loss(const std::vector<std::vector<double>>& steps, const TokenList& gold,
               const Vocab& tokens) {
  if (gold.empty() || gold.back() != kSentinelEnd) {
    throw ConstraintError("gold relation must end with " + kSentinelEnd);
  }
  if (steps.size() != gold.size()) {
    throw ConstraintError("ce_loss: step count does not match gold length");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    int id = tokens.lookup(gold[i]);
    if (id < 0) throw ConfigError("gold token '" + gold[i] + "' not in vocabulary");
    loss -= steps[i][static_cast<std::size_t>(id)];
  }
  if (!std::isfinite(loss)) throw NumericError("ce_loss is non-finite");
  return loss;
}

std::vector<TokenList> sample_negatives(const RelationSchema& schema,
                                        const std::set<RelationLabel>& golds,
                                        std::size_t pool_size, Rng& rng,
                                        bool pool_is_total) {
  if (schema.relations.size() < golds.size()) {
    throw DataError("schema smaller than the gold set");
  }
  if (pool_is_total && pool_size < golds.size()) {
    throw DataError("negative pool smaller than the gold set");
  }
  std::vector<const VerbalizedRelation*> candidates;
  for (const auto& rel : schema.relations) {
    if (!golds.contains(rel.label)) candidates.push_back(&rel);
  }
  const std::size_t want = pool_is_total ? pool_size - golds.size() : pool_size;
  const std::size_t n = std::min(want, candidates.size());
  // Partial Fisher-Yates: first n slots are a uniform sample without
  // replacement.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + rng.uniform(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  std::vector<TokenList> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(candidates[i]->tokens);
  return out;
}

std::vector<TokenList> sample_negatives(const RelationSchema& schema,
                                        const std::set<RelationLabel>& golds,
                                        std::size_t pool_size, std::uint64_t seed,
                                        bool pool_is_total) {
  Rng rng(seed);
  return sample_negatives(schema, golds, pool_size, rng, pool_is_total);
}

double contrastive_loss(const ContrastiveBatch& batch, double lambda, double zeta,
                        Convention convention) {
  if (zeta <= 0.0) throw ConfigError("zeta must be > 0");
  double loss = 0.0;
  if (convention == Convention::likelihood_consistent) {
    // Golds pushed below the borderline, fakes above the margin threshold.
    for (double f : batch.positive_scores) loss += std::max(f - lambda, 0.0);
    for (double f : batch.negative_scores) loss += std::max(zeta - f, 0.0);
  } else {
    for (double f : batch.positive_scores) loss += std::max(zeta - f, 0.0);
    for (double f : batch.negative_scores) loss += std::max(f - zeta, 0.0);
  }
  return loss;
}

double combined_loss(double lbls, double ctl, double mu) {
  if (mu <= 0.0) throw ConfigError("mu must be > 0");
  return ctl + mu * lbls;
}

namespace {

LossSpec spec_from_config(const TrainConfig& config, LossKind kind) {
  LossSpec spec;
  spec.kind = kind;
  spec.beta = config.lbls.beta;
  spec.support = config.lbls.support;
  spec.alpha = config.alpha;
  spec.lambda = config.lambda;
  spec.zeta = config.zeta;
  spec.mu = config.mu;
  spec.convention = config.convention;
  return spec;
}

// The active loss kinds for an ablation variant. "ctl" keeps plain
// cross-entropy as its likelihood term so the model still learns to emit
// relations.
std::vector<LossKind> ablation_kinds(const std::string& ablation) {
  if (ablation == "ce") return {LossKind::ce};
  if (ablation == "lbls") return {LossKind::lbls};
  if (ablation == "ctl") return {LossKind::ce, LossKind::ctl};
  if (ablation == "lbls+ctl") return {LossKind::combined};
  throw ConfigError("unknown ablation '" + ablation + "'");
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& dev_set,
                  const RelationSchema& schema, const RelationTrie& trie,
                  const TrainConfig& config) {
  if (train_set.instances.empty()) throw DataError("empty training set");

  std::vector<FormattedSample> rendered;
  std::vector<const REInstance*> instances;
  rendered.reserve(train_set.instances.size());
  for (const auto& inst : train_set.instances) {
    rendered.push_back(render(inst, schema, config.style));
    instances.push_back(&inst);
  }

  TrainResult result;
  result.params = init_params(schema, trie, rendered);

  const std::size_t n = rendered.size();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * batches_per_epoch;
  const auto kinds = ablation_kinds(config.ablation);

  Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::size_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::vector<TrainSample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        TrainSample ts;
        ts.sample = rendered[order[i]];
        ts.negatives = sample_negatives(schema, instances[order[i]]->gold_relations,
                                        config.pool_size, rng, config.pool_is_total);
        batch.push_back(std::move(ts));
      }

      ++global_step;
      const double lr = learning_rate(global_step, total_steps, config.peak_step_size);
      std::vector<double> grad(result.params.weights.size(), 0.0);
      double batch_loss = 0.0;
      for (LossKind kind : kinds) {
        const LossSpec spec = spec_from_config(config, kind);
        auto g = loss_gradient(result.params, batch, trie, spec);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        batch_loss += loss_value(result.params, batch, trie, spec);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(global_step));
      }
      apply_update(result.params, grad, lr);
      epoch_loss += batch_loss;
      ++epoch_batches;
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.mean_loss = epoch_loss / static_cast<double>(epoch_batches);

    // Dev micro-F1 in threshold mode plus the gold/fake margin diagnostic.
    if (!dev_set.instances.empty()) {
      DecodeConfig dc;
      dc.beam_size = config.beam_size;
      dc.alpha = config.alpha;
      dc.lambda = config.lambda;
      dc.convention = config.convention;
      auto preds = predict_threshold(result.params, dev_set, schema, trie,
                                     config.style, dc);
      metrics.dev_micro_f1 = micro_f1(preds, gold_map(dev_set), false).f1;

      double gold_f_sum = 0.0, fake_f_sum = 0.0;
      std::size_t gold_n = 0, fake_n = 0;
      Rng eval_rng(config.seed + 1);
      for (const auto& inst : dev_set.instances) {
        auto sample = render(inst, schema, config.style);
        for (const auto& gold : sample.gold_relation_tokens) {
          auto lps = sequence_logprob(result.params, sample, gold);
          gold_f_sum += score(gold, lps, config.alpha);
          ++gold_n;
        }
        for (const auto& fake :
             sample_negatives(schema, inst.gold_relations, config.pool_size, eval_rng,
                              config.pool_is_total)) {
          auto lps = sequence_logprob(result.params, sample, fake);
          fake_f_sum += score(fake, lps, config.alpha);
          ++fake_n;
        }
      }
      if (gold_n > 0) metrics.mean_gold_f = gold_f_sum / static_cast<double>(gold_n);
      if (fake_n > 0) metrics.mean_fake_f = fake_f_sum / static_cast<double>(fake_n);
    }
    result.epochs.push_back(metrics);
  }
  return result;
}

}  // namespace cptuning
