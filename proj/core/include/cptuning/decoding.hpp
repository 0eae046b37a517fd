#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "cptuning/model.hpp"
#include "cptuning/schema.hpp"
#include "cptuning/templating.hpp"

namespace cptuning {

// A complete decoded relation with its per-token log-probabilities and
// length-normalized score f. Lower f means more likely.
struct CandidateRelation {
  RelationLabel label;
  TokenList tokens;  // complete trie path incl. <E>
  std::vector<double> token_logprobs;
  double f = 0.0;
  bool established = false;

  double sum_logprob() const;
};

struct DecodeConfig {
  std::size_t beam_size = 16;  // K
  double alpha = 0.6;          // length penalty
  double lambda = 1.0;         // borderline
  Convention convention = Convention::likelihood_consistent;
};

// f = (-sum of token log-probs) / |r|^alpha, |r| counting <E>.
double score(const TokenList& tokens, const std::vector<double>& token_logprobs,
             double alpha);

// Prefix-given constrained beam search over the trie. Partial beams are
// ranked by summed log-probability; beams reaching <E> are frozen and keep
// competing with expanding ones. Returns at most K distinct complete paths,
// sorted by f ascending (ties broken by token order).
std::vector<CandidateRelation> pgc_decode(const ModelParams& params,
                                          const FormattedSample& sample,
                                          const RelationTrie& trie,
                                          const RelationSchema& schema,
                                          const DecodeConfig& config);

// Exact top-K by summed log-probability over every complete trie path.
// Test oracle; refuses schemas with more than 10^4 paths.
std::vector<CandidateRelation> brute_force_decode(const ModelParams& params,
                                                  const FormattedSample& sample,
                                                  const RelationTrie& trie,
                                                  const RelationSchema& schema,
                                                  std::size_t k, double alpha);

// Borderline selection. Default convention establishes f < lambda,
// paper_literal establishes f > lambda. Falls back to the single best
// candidate when nothing clears the borderline; drops "no relation" when any
// real relation is established.
std::vector<CandidateRelation> select(const std::vector<CandidateRelation>& candidates,
                                      const DecodeConfig& config);

// One JSON record per candidate: instance id, tokens, log-probs, f,
// established flag.
void export_candidates(std::ostream& out, const std::string& instance_id,
                       const std::vector<CandidateRelation>& candidates);

}  // namespace cptuning
