#include "cptuning/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cptuning/errors.hpp"
#include "cptuning/training.hpp"

namespace cptuning {

Convention parse_convention(const std::string& name) {
  if (name == "likelihood_consistent") return Convention::likelihood_consistent;
  if (name == "paper_literal") return Convention::paper_literal;
  throw ConfigError("unknown convention '" + name + "'");
}

std::string to_string(Convention c) {
  return c == Convention::likelihood_consistent ? "likelihood_consistent"
                                                : "paper_literal";
}

SmoothingSupport parse_smoothing_support(const std::string& name) {
  if (name == "layer") return SmoothingSupport::layer;
  if (name == "siblings") return SmoothingSupport::siblings;
  throw ConfigError("unknown smoothing support '" + name + "'");
}

std::string to_string(SmoothingSupport s) {
  return s == SmoothingSupport::layer ? "layer" : "siblings";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "ce") return LossKind::ce;
  if (name == "lbls") return LossKind::lbls;
  if (name == "ctl") return LossKind::ctl;
  if (name == "combined") return LossKind::combined;
  throw ConfigError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::ce: return "ce";
    case LossKind::lbls: return "lbls";
    case LossKind::ctl: return "ctl";
    case LossKind::combined: return "combined";
  }
  return "?";
}

int Vocab::add(const std::string& item) {
  auto it = index.find(item);
  if (it != index.end()) return it->second;
  int id = static_cast<int>(items.size());
  items.push_back(item);
  index.emplace(item, id);
  return id;
}

int Vocab::lookup(const std::string& item) const {
  auto it = index.find(item);
  return it == index.end() ? -1 : it->second;
}

namespace {

std::string join_path(const TokenList& path) {
  std::string out;
  for (const Token& t : path) {
    if (!out.empty()) out.push_back('|');
    out += t;
  }
  return out;
}

// Feature names of (sample, partial relation): source unigrams, prefix
// segment tokens (subject side vs object side of the prefix), the current
// trie-path id, and the decoding position.
std::vector<std::string> feature_names(const FormattedSample& sample,
                                       const TokenList& partial) {
  std::vector<std::string> names;
  std::set<Token> seen;
  for (const Token& t : sample.source_tokens) {
    if (seen.insert(t).second) names.push_back("src:" + t);
  }
  int segment = 0;  // 0 before <X>, 1 subject side, 2 object side
  for (const Token& t : sample.prefix_tokens) {
    if (t == kSentinelX) { segment = 1; continue; }
    if (t == kSentinelY) { segment = 2; continue; }
    if (t == kSentinelZ) break;
    names.push_back((segment == 1 ? "subj:" : "obj:") + t);
  }
  names.push_back("node:" + join_path(partial));
  names.push_back("pos:" + std::to_string(partial.size() + 1));
  names.push_back("bias");
  return names;
}

// All trie prefixes (node paths) including the empty one.
void collect_prefixes(const RelationTrie& trie, int node, TokenList& path,
                      std::vector<TokenList>& out) {
  out.push_back(path);
  for (const auto& [tok, idx] : trie.nodes()[node].children) {
    path.push_back(tok);
    collect_prefixes(trie, idx, path, out);
    path.pop_back();
  }
}

}  // namespace

ModelParams init_params(const RelationSchema& schema, const RelationTrie& trie,
                        const std::vector<FormattedSample>& samples) {
  ModelParams params;
  for (const Token& t : schema_token_set(schema)) params.tokens.add(t);

  std::vector<TokenList> prefixes;
  TokenList path;
  collect_prefixes(trie, 0, path, prefixes);

  // Context features depend on the sample only, path/position features only
  // on the trie; register them separately.
  for (const auto& sample : samples) {
    for (const auto& name : feature_names(sample, {})) params.features.add(name);
  }
  for (const auto& prefix : prefixes) {
    params.features.add("node:" + join_path(prefix));
    params.features.add("pos:" + std::to_string(prefix.size() + 1));
  }
  params.weights.assign(params.features.size() * params.tokens.size(), 0.0);
  return params;
}

FeatureVector featurize(const Vocab& features, const FormattedSample& sample,
                        const TokenList& partial_relation) {
  FeatureVector fv;
  std::set<int> seen;
  for (const auto& name : feature_names(sample, partial_relation)) {
    int id = features.lookup(name);
    if (id >= 0 && seen.insert(id).second) fv.entries.emplace_back(id, 1.0);
  }
  return fv;
}

namespace {

std::vector<double> log_softmax_scores(const ModelParams& params,
                                       const FeatureVector& fv) {
  const std::size_t v = params.tokens.size();
  std::vector<double> scores(v, 0.0);
  for (const auto& [fid, w] : fv.entries) {
    const double* row = params.weights.data() + static_cast<std::size_t>(fid) * v;
    for (std::size_t j = 0; j < v; ++j) scores[j] += w * row[j];
  }
  double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  double lse = mx + std::log(sum);
  for (double& s : scores) s -= lse;
  return scores;
}

void check_relation_tokens(const ModelParams& params, const TokenList& relation) {
  for (const Token& t : relation) {
    if (params.tokens.lookup(t) < 0) {
      throw ConfigError("token '" + t + "' is not in the model vocabulary");
    }
  }
}

}  // namespace

std::vector<double> next_token_logprobs(const ModelParams& params,
                                        const FormattedSample& sample,
                                        const TokenList& partial_relation) {
  check_relation_tokens(params, partial_relation);
  return log_softmax_scores(params, featurize(params.features, sample, partial_relation));
}

std::vector<double> sequence_logprob(const ModelParams& params,
                                     const FormattedSample& sample,
                                     const TokenList& relation) {
  if (relation.empty() || relation.back() != kSentinelEnd) {
    throw ConstraintError("relation must end with " + kSentinelEnd);
  }
  check_relation_tokens(params, relation);
  std::vector<double> out;
  TokenList partial;
  for (const Token& t : relation) {
    auto lp = next_token_logprobs(params, sample, partial);
    out.push_back(lp[static_cast<std::size_t>(params.tokens.lookup(t))]);
    partial.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and gradient
// ---------------------------------------------------------------------------

namespace {

struct StepForward {
  FeatureVector feats;
  std::vector<double> logprobs;
};

std::vector<StepForward> forward_relation(const ModelParams& params,
                                          const FormattedSample& sample,
                                          const TokenList& relation) {
  check_relation_tokens(params, relation);
  std::vector<StepForward> steps;
  TokenList partial;
  for (const Token& t : relation) {
    StepForward step;
    step.feats = featurize(params.features, sample, partial);
    step.logprobs = log_softmax_scores(params, step.feats);
    steps.push_back(std::move(step));
    partial.push_back(t);
  }
  return steps;
}

std::vector<std::vector<double>> step_logprobs(const std::vector<StepForward>& steps) {
  std::vector<std::vector<double>> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.logprobs);
  return out;
}

// grad[f][v] += scale * w_f * (softmax[v] - target[v])
void accumulate_softmax_grad(std::vector<double>& grad, const ModelParams& params,
                             const StepForward& step,
                             const std::vector<double>& target, double scale) {
  const std::size_t v = params.tokens.size();
  for (const auto& [fid, w] : step.feats.entries) {
    double* row = grad.data() + static_cast<std::size_t>(fid) * v;
    const double sw = scale * w;
    for (std::size_t j = 0; j < v; ++j) {
      row[j] += sw * (std::exp(step.logprobs[j]) - target[j]);
    }
  }
}

double relation_f(const std::vector<StepForward>& steps, const TokenList& relation,
                  const ModelParams& params, double alpha) {
  double nll = 0.0;
  for (std::size_t i = 0; i < relation.size(); ++i) {
    nll -= steps[i].logprobs[static_cast<std::size_t>(params.tokens.lookup(relation[i]))];
  }
  return nll / std::pow(static_cast<double>(relation.size()), alpha);
}

// Adds d(f)/d(theta) * scale for one relation.
void accumulate_f_grad(std::vector<double>& grad, const ModelParams& params,
                       const std::vector<StepForward>& steps,
                       const TokenList& relation, double alpha, double scale) {
  const std::size_t v = params.tokens.size();
  const double norm = std::pow(static_cast<double>(relation.size()), alpha);
  std::vector<double> onehot(v, 0.0);
  for (std::size_t i = 0; i < relation.size(); ++i) {
    const auto gold = static_cast<std::size_t>(params.tokens.lookup(relation[i]));
    onehot[gold] = 1.0;
    accumulate_softmax_grad(grad, params, steps[i], onehot, scale / norm);
    onehot[gold] = 0.0;
  }
}

struct SampleLoss {
  double value = 0.0;
};

// Shared walk over one training sample: computes the requested loss value
// and, when `grad` is non-null, its analytic gradient.
double sample_loss(const ModelParams& params, const TrainSample& ts,
                   const RelationTrie& trie, const LossSpec& spec,
                   std::vector<double>* grad) {
  const auto& golds = ts.sample.gold_relation_tokens;
  if (golds.empty()) {
    throw DataError("sample '" + ts.sample.instance_id + "' has no gold relations");
  }
  const double inv_golds = 1.0 / static_cast<double>(golds.size());
  const bool need_likelihood =
      spec.kind == LossKind::ce || spec.kind == LossKind::lbls ||
      spec.kind == LossKind::combined;
  const bool need_ctl = spec.kind == LossKind::ctl || spec.kind == LossKind::combined;
  // Weight of the lbls/ce term in the total.
  const double like_weight = spec.kind == LossKind::combined ? spec.mu : 1.0;
  const double beta = spec.kind == LossKind::ce ? 0.0 : spec.beta;

  double total = 0.0;
  ContrastiveBatch cb;

  for (const TokenList& gold : golds) {
    auto steps = forward_relation(params, ts.sample, gold);

    if (need_likelihood) {
      // EPO: the likelihood term is averaged over gold relations.
      for (std::size_t i = 0; i < gold.size(); ++i) {
        auto target = lbls_distribution(params.tokens, trie, gold, i + 1, beta,
                                        spec.support);
        double step_loss = 0.0;
        for (std::size_t j = 0; j < target.size(); ++j) {
          if (target[j] != 0.0) step_loss -= target[j] * steps[i].logprobs[j];
        }
        total += like_weight * inv_golds * step_loss;
        if (grad) {
          accumulate_softmax_grad(*grad, params, steps[i], target,
                                  like_weight * inv_golds);
        }
      }
    }

    if (need_ctl) {
      double f = relation_f(steps, gold, params, spec.alpha);
      cb.positive_scores.push_back(f);
      double hinge_grad = 0.0;  // d(loss)/d(f)
      if (spec.convention == Convention::likelihood_consistent) {
        if (f > spec.lambda) hinge_grad = 1.0;  // max(f - lambda, 0)
      } else {
        if (f < spec.zeta) hinge_grad = -1.0;  // max(zeta - f, 0)
      }
      if (hinge_grad != 0.0 && grad) {
        accumulate_f_grad(*grad, params, steps, gold, spec.alpha, hinge_grad);
      }
    }
  }

  if (need_ctl) {
    for (const TokenList& fake : ts.negatives) {
      auto steps = forward_relation(params, ts.sample, fake);
      double f = relation_f(steps, fake, params, spec.alpha);
      cb.negative_scores.push_back(f);
      double hinge_grad = 0.0;
      if (spec.convention == Convention::likelihood_consistent) {
        if (f < spec.zeta) hinge_grad = -1.0;  // max(zeta - f, 0)
      } else {
        if (f > spec.zeta) hinge_grad = 1.0;  // max(f - zeta, 0)
      }
      if (hinge_grad != 0.0 && grad) {
        accumulate_f_grad(*grad, params, steps, fake, spec.alpha, hinge_grad);
      }
    }
    total += contrastive_loss(cb, spec.lambda, spec.zeta, spec.convention);
  }

  if (!std::isfinite(total)) {
    throw NumericError("non-finite loss for sample '" + ts.sample.instance_id + "'");
  }
  return total;
}

}  // namespace

double loss_value(const ModelParams& params, const std::vector<TrainSample>& batch,
                  const RelationTrie& trie, const LossSpec& spec) {
  if (batch.empty()) throw DataError("loss over an empty batch");
  double total = 0.0;
  for (const auto& ts : batch) total += sample_loss(params, ts, trie, spec, nullptr);
  return total / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const ModelParams& params,
                                  const std::vector<TrainSample>& batch,
                                  const RelationTrie& trie, const LossSpec& spec) {
  if (batch.empty()) throw DataError("gradient over an empty batch");
  std::vector<double> grad(params.weights.size(), 0.0);
  for (const auto& ts : batch) sample_loss(params, ts, trie, spec, &grad);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return grad;
}

void apply_update(ModelParams& params, const std::vector<double>& gradient,
                  double step_size) {
  if (gradient.size() != params.weights.size()) {
    throw NumericError("gradient shape mismatch");
  }
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    params.weights[i] -= step_size * gradient[i];
  }
}

double learning_rate(std::size_t step, std::size_t total_steps, double peak) {
  if (total_steps == 0 || step == 0 || step > total_steps) {
    throw ConfigError("learning_rate: step outside [1, total_steps]");
  }
  const std::size_t warmup = std::max<std::size_t>(1, (total_steps + 9) / 10);
  if (step <= warmup) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps == warmup) return peak;
  return peak * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

void ModelParams::save(std::ostream& out) const {
  out << "cptuning-checkpoint v1\n";
  out << "features " << features.size() << "\n";
  for (const auto& f : features.items) out << f << "\n";
  out << "tokens " << tokens.size() << "\n";
  for (const auto& t : tokens.items) out << t << "\n";
  out << "weights " << features.size() << " " << tokens.size() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // Hex floats round-trip bit-exactly.
    std::snprintf(buf, sizeof(buf), "%a", weights[i]);
    out << buf << "\n";
  }
}

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  save(out);
}

ModelParams ModelParams::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "cptuning-checkpoint v1") {
    throw DataError("bad checkpoint header");
  }
  auto read_count = [&](const std::string& tag) {
    std::string word;
    std::size_t n = 0;
    in >> word >> n;
    if (word != tag) throw DataError("bad checkpoint section: expected " + tag);
    std::getline(in, line);  // eat rest of line
    return n;
  };
  ModelParams params;
  std::size_t nf = read_count("features");
  for (std::size_t i = 0; i < nf; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated checkpoint (features)");
    params.features.add(line);
  }
  std::size_t nt = read_count("tokens");
  for (std::size_t i = 0; i < nt; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated checkpoint (tokens)");
    params.tokens.add(line);
  }
  std::string word;
  std::size_t rows = 0, cols = 0;
  in >> word >> rows >> cols;
  if (word != "weights" || rows != nf || cols != nt) {
    throw DataError("bad checkpoint weight shape");
  }
  params.weights.resize(rows * cols);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    if (!(in >> word)) throw DataError("truncated checkpoint (weights)");
    params.weights[i] = std::strtod(word.c_str(), nullptr);
  }
  return params;
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  return load(in);
}

}  // namespace cptuning
