#include "cptuning/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cptuning/errors.hpp"

namespace cptuning {

double CandidateRelation::sum_logprob() const {
  return std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0);
}

double score(const TokenList& tokens, const std::vector<double>& token_logprobs,
             double alpha) {
  if (tokens.empty()) throw ConstraintError("score: empty candidate");
  if (tokens.size() != token_logprobs.size()) {
    throw ConstraintError("score: token/log-prob length mismatch");
  }
  double nll = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw NumericError("score: log-probabilities must be finite and <= 0");
    }
    nll -= lp;
  }
  return nll / std::pow(static_cast<double>(tokens.size()), alpha);
}

namespace {

void check_vocabulary(const ModelParams& params, const RelationTrie& trie) {
  for (int d = 1; d <= trie.depth(); ++d) {
    for (const Token& t : trie.layer_tokens(d)) {
      if (params.tokens.lookup(t) < 0) {
        throw ConfigError("model vocabulary is missing trie token '" + t + "'");
      }
    }
  }
}

struct Beam {
  TokenList tokens;
  std::vector<double> token_logprobs;
  double sum = 0.0;
  int node = 0;  // trie node index at the end of `tokens`
  bool frozen = false;
};

bool beam_order(const Beam& a, const Beam& b) {
  if (a.sum != b.sum) return a.sum > b.sum;
  return a.tokens < b.tokens;  // lexicographic tie-break, bit determinism
}

CandidateRelation finish(const RelationTrie& trie, const RelationSchema& schema,
                         Beam&& beam, double alpha) {
  CandidateRelation cand;
  cand.f = score(beam.tokens, beam.token_logprobs, alpha);
  int rel = trie.nodes()[static_cast<std::size_t>(beam.node)].relation_index;
  cand.label = schema.relations[static_cast<std::size_t>(rel)].label;
  cand.tokens = std::move(beam.tokens);
  cand.token_logprobs = std::move(beam.token_logprobs);
  return cand;
}

void sort_by_f(std::vector<CandidateRelation>& candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const CandidateRelation& a, const CandidateRelation& b) {
              if (a.f != b.f) return a.f < b.f;
              return a.tokens < b.tokens;
            });
}

}  // namespace

std::vector<CandidateRelation> pgc_decode(const ModelParams& params,
                                          const FormattedSample& sample,
                                          const RelationTrie& trie,
                                          const RelationSchema& schema,
                                          const DecodeConfig& config) {
  if (config.beam_size < 1) throw ConfigError("beam size must be >= 1");
  if (trie.path_count() == 0) throw ConfigError("empty relation trie");
  check_vocabulary(params, trie);

  std::vector<Beam> beams(1);  // the empty path seeded with the prefix
  for (int layer = 0; layer < trie.depth(); ++layer) {
    bool any_expanding = false;
    std::vector<Beam> pool;
    for (Beam& beam : beams) {
      if (beam.frozen) {
        pool.push_back(std::move(beam));
        continue;
      }
      any_expanding = true;
      auto logprobs = next_token_logprobs(params, sample, beam.tokens);
      const auto& children = trie.nodes()[static_cast<std::size_t>(beam.node)].children;
      for (const auto& [tok, idx] : children) {
        Beam next = beam;
        next.tokens.push_back(tok);
        double lp = logprobs[static_cast<std::size_t>(params.tokens.lookup(tok))];
        next.token_logprobs.push_back(lp);
        next.sum += lp;
        next.node = idx;
        next.frozen = (tok == kSentinelEnd);
        pool.push_back(std::move(next));
      }
    }
    if (!any_expanding) {
      // Every survivor is frozen; restore them before leaving the loop.
      beams = std::move(pool);
      break;
    }
    std::sort(pool.begin(), pool.end(), beam_order);
    if (pool.size() > config.beam_size) pool.resize(config.beam_size);
    beams = std::move(pool);
  }

  std::vector<CandidateRelation> out;
  for (Beam& beam : beams) {
    // Every relation is <E>-terminated, so depth-N iteration freezes all.
    if (!beam.frozen) continue;
    out.push_back(finish(trie, schema, std::move(beam), config.alpha));
  }
  sort_by_f(out);
  return out;
}

std::vector<CandidateRelation> brute_force_decode(const ModelParams& params,
                                                  const FormattedSample& sample,
                                                  const RelationTrie& trie,
                                                  const RelationSchema& schema,
                                                  std::size_t k, double alpha) {
  if (trie.path_count() > 10000) {
    throw Error("brute_force_decode: path explosion guard exceeded");
  }
  check_vocabulary(params, trie);

  std::vector<Beam> complete;
  // DFS over every complete path, scoring each token teacher-forced.
  std::vector<Beam> stack{Beam{}};
  while (!stack.empty()) {
    Beam beam = std::move(stack.back());
    stack.pop_back();
    if (beam.frozen) {
      complete.push_back(std::move(beam));
      continue;
    }
    auto logprobs = next_token_logprobs(params, sample, beam.tokens);
    const auto& children = trie.nodes()[static_cast<std::size_t>(beam.node)].children;
    for (const auto& [tok, idx] : children) {
      Beam next = beam;
      next.tokens.push_back(tok);
      double lp = logprobs[static_cast<std::size_t>(params.tokens.lookup(tok))];
      next.token_logprobs.push_back(lp);
      next.sum += lp;
      next.node = idx;
      next.frozen = (tok == kSentinelEnd);
      stack.push_back(std::move(next));
    }
  }

  std::sort(complete.begin(), complete.end(), beam_order);
  if (complete.size() > k) complete.resize(k);
  std::vector<CandidateRelation> out;
  for (Beam& beam : complete) {
    out.push_back(finish(trie, schema, std::move(beam), alpha));
  }
  sort_by_f(out);
  return out;
}

std::vector<CandidateRelation> select(const std::vector<CandidateRelation>& candidates,
                                      const DecodeConfig& config) {
  if (candidates.empty()) throw ConstraintError("select: empty candidate list");

  const TokenList no_relation_tokens{"no", "relation", kSentinelEnd};
  std::vector<CandidateRelation> established;
  for (const auto& cand : candidates) {
    bool keep = config.convention == Convention::likelihood_consistent
                    ? cand.f < config.lambda
                    : cand.f > config.lambda;
    if (keep) {
      established.push_back(cand);
      established.back().established = true;
    }
  }
  if (established.empty()) {
    // Every dataset instance carries a label, possibly "no relation".
    auto best = std::min_element(candidates.begin(), candidates.end(),
                                 [](const CandidateRelation& a, const CandidateRelation& b) {
                                   if (a.f != b.f) return a.f < b.f;
                                   return a.tokens < b.tokens;
                                 });
    established.push_back(*best);
    established.back().established = true;
    return established;
  }
  bool any_real = std::any_of(established.begin(), established.end(),
                              [&](const CandidateRelation& c) {
                                return c.tokens != no_relation_tokens;
                              });
  if (any_real) {
    std::erase_if(established, [&](const CandidateRelation& c) {
      return c.tokens == no_relation_tokens;
    });
  }
  return established;
}

void export_candidates(std::ostream& out, const std::string& instance_id,
                       const std::vector<CandidateRelation>& candidates) {
  for (const auto& cand : candidates) {
    nlohmann::json rec;
    rec["id"] = instance_id;
    rec["label"] = cand.label.raw;
    rec["tokens"] = cand.tokens;
    rec["token_logprobs"] = cand.token_logprobs;
    rec["f"] = cand.f;
    rec["established"] = cand.established;
    out << rec.dump() << "\n";
  }
}

}  // namespace cptuning
