#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cptuning/schema.hpp"
#include "cptuning/templating.hpp"

namespace cptuning {

// Shared between scoring/selection and the contrastive loss.
// likelihood_consistent: lower f = more likely, established iff f < lambda.
// paper_literal: established iff f > lambda; hinges flipped accordingly.
enum class Convention { likelihood_consistent, paper_literal };

Convention parse_convention(const std::string& name);
std::string to_string(Convention c);

enum class SmoothingSupport { layer, siblings };

SmoothingSupport parse_smoothing_support(const std::string& name);
std::string to_string(SmoothingSupport s);

struct Vocab {
  std::vector<std::string> items;
  std::map<std::string, int> index;

  int add(const std::string& item);
  int lookup(const std::string& item) const;  // -1 when absent
  std::size_t size() const { return items.size(); }
};

// Sparse indicator features: active (feature id, weight) pairs, ids unique.
struct FeatureVector {
  std::vector<std::pair<int, double>> entries;
};

// Log-linear conditional model over the relation-token vocabulary. Stands in
// for the pre-trained encoder-decoder: same contract (per-step conditional
// log-probabilities given source, prefix, and partial relation), desk-scale
// parameterization.
struct ModelParams {
  Vocab features;
  Vocab tokens;  // relation-token vocabulary, <E> included
  std::vector<double> weights;  // row-major, features.size() x tokens.size()

  double& at(std::size_t f, std::size_t v) { return weights[f * tokens.size() + v]; }
  double at(std::size_t f, std::size_t v) const { return weights[f * tokens.size() + v]; }

  void save(const std::string& path) const;
  void save(std::ostream& out) const;
  static ModelParams load(const std::string& path);
  static ModelParams load(std::istream& in);
};

// Token vocabulary from the schema, features from the given samples crossed
// with every trie prefix. Weights start at zero.
ModelParams init_params(const RelationSchema& schema, const RelationTrie& trie,
                        const std::vector<FormattedSample>& samples);

// Active features of (sample, partial relation). Unknown feature names are
// dropped; the frozen vocabulary defines the model.
FeatureVector featurize(const Vocab& features, const FormattedSample& sample,
                        const TokenList& partial_relation);

// Log-softmax over the relation-token vocabulary for the next step.
// Deterministic; probabilities sum to 1 within 1e-9.
std::vector<double> next_token_logprobs(const ModelParams& params,
                                        const FormattedSample& sample,
                                        const TokenList& partial_relation);

// Per-token log-probabilities of a complete relation (teacher forcing).
// The sum is the sequence log-probability.
std::vector<double> sequence_logprob(const ModelParams& params,
                                     const FormattedSample& sample,
                                     const TokenList& relation);

enum class LossKind { ce, lbls, ctl, combined };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind k);

struct LossSpec {
  LossKind kind = LossKind::combined;
  double beta = 0.2;              // smoothing mass
  SmoothingSupport support = SmoothingSupport::layer;
  double alpha = 0.6;             // length penalty
  double lambda = 1.0;            // borderline
  double zeta = 1.2;              // margin threshold
  double mu = 0.1;                // balance factor
  Convention convention = Convention::likelihood_consistent;
};

// One training example: a rendered sample, its gold relations, and the fake
// relations drawn for the contrastive term.
struct TrainSample {
  FormattedSample sample;
  std::vector<TokenList> negatives;
};

// Batch-mean loss for the given LossSpec. Non-finite results raise NumericError
// with the offending sample id.
double loss_value(const ModelParams& params, const std::vector<TrainSample>& batch,
                  const RelationTrie& trie, const LossSpec& spec);

// Analytic batch-mean gradient, same shape as params.weights. Hinge terms use
// subgradient 0 at the kink.
std::vector<double> loss_gradient(const ModelParams& params,
                                  const std::vector<TrainSample>& batch,
                                  const RelationTrie& trie, const LossSpec& spec);

// In-place gradient-descent step.
void apply_update(ModelParams& params, const std::vector<double>& gradient,
                  double step_size);

// Linear warmup over the first 10% of steps, then linear decay to 0.
// `step` is 1-based in [1, total_steps].
double learning_rate(std::size_t step, std::size_t total_steps, double peak);

}  // namespace cptuning
