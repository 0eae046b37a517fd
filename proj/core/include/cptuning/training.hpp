#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cptuning/data_io.hpp"
#include "cptuning/model.hpp"
#include "cptuning/rng.hpp"
#include "cptuning/schema.hpp"

namespace cptuning {

struct LblsConfig {
  double beta = 0.2;  // smoothing mass, in [0, 1)
  SmoothingSupport support = SmoothingSupport::layer;
};

// Scores entering the contrastive hinge: gold relations and sampled fakes,
// each already scored by f under the current model.
struct ContrastiveBatch {
  std::vector<double> positive_scores;  // f of every gold relation
  std::vector<double> negative_scores;  // f of sampled fake relations
};

struct TrainConfig {
  std::string ablation = "lbls+ctl";  // ce | lbls | ctl | lbls+ctl
  TemplateStyle style = TemplateStyle::s1;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double peak_step_size = 0.1;
  double alpha = 0.6;
  double lambda = 1.0;
  double zeta = 1.2;
  double mu = 0.1;
  LblsConfig lbls;
  std::size_t pool_size = 16;   // total gold + fake relations per sample
  bool pool_is_total = true;    // false: pool_size fakes regardless of golds
  Convention convention = Convention::likelihood_consistent;
  std::size_t beam_size = 16;   // used for per-epoch dev evaluation
};

// Soft-label target for position `position` (1-based) of a gold relation.
// The gold token gets 1-beta; the remaining support tokens share beta
// equally. Support is the whole trie layer or the gold node's siblings.
// A singleton support degenerates to a one-hot target.
std::vector<double> lbls_distribution(const Vocab& tokens, const RelationTrie& trie,
                                      const TokenList& gold, std::size_t position,
                                      double beta, SmoothingSupport support);

// Soft-label cross-entropy against lbls_distribution, summed over positions.
// `steps` holds the model's per-step log-prob vectors for the gold relation.
double lbls_loss(const std::vector<std::vector<double>>& steps, const TokenList& gold,
                 const Vocab& tokens, const RelationTrie& trie, double beta,
                 SmoothingSupport support);

// Plain token-level cross-entropy, <E> included. Equals lbls_loss at beta=0.
double ce_loss(const std::vector<std::vector<double>>& steps, const TokenList& gold,
               const Vocab& tokens);

// Fake relations drawn uniformly without replacement from the schema minus
// the golds. Pool size counts golds when pool_is_total.
std::vector<TokenList> sample_negatives(const RelationSchema& schema,
                                        const std::set<RelationLabel>& golds,
                                        std::size_t pool_size, Rng& rng,
                                        bool pool_is_total = true);
std::vector<TokenList> sample_negatives(const RelationSchema& schema,
                                        const std::set<RelationLabel>& golds,
                                        std::size_t pool_size, std::uint64_t seed,
                                        bool pool_is_total = true);

// Margin hinges over scored relations. Default convention pushes golds below
// lambda and fakes above zeta; paper_literal flips both hinges around zeta.
double contrastive_loss(const ContrastiveBatch& batch, double lambda, double zeta,
                        Convention convention);

// L = L_ctl + mu * L_lbls.
double combined_loss(double lbls, double ctl, double mu);

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double dev_micro_f1 = 0.0;
  double mean_gold_f = 0.0;
  double mean_fake_f = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> epochs;
};

// Full training loop: renders the corpus, runs mini-batch gradient descent
// with the warmup/decay schedule, and records per-epoch loss and dev
// micro-F1. Deterministic given the seed. Aborts with NumericError on a
// non-finite loss.
TrainResult train(const Dataset& train_set, const Dataset& dev_set,
                  const RelationSchema& schema, const RelationTrie& trie,
                  const TrainConfig& config);

}  // namespace cptuning
