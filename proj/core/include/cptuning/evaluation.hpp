#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cptuning/data_io.hpp"
#include "cptuning/decoding.hpp"
#include "cptuning/model.hpp"
#include "cptuning/training.hpp"

namespace cptuning {

using PredictionMap = std::map<std::string, std::set<RelationLabel>>;

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  // label -> {tp, fp, fn}
  std::map<std::string, std::array<std::size_t, 3>> per_relation;
  std::string mode = "threshold";  // threshold | ranking
  std::map<std::size_t, double> h_at;  // M -> mean H@M
  bool truncated_ranking = false;      // some instance had fewer candidates than n
  std::string config_hash;
  std::uint64_t seed = 0;
};

// Pair-level micro precision/recall/F1: a (id, relation) pair is one count.
// exclude_no_relation removes "no relation" pairs from both sides first.
EvalReport micro_f1(const PredictionMap& predictions, const PredictionMap& golds,
                    bool exclude_no_relation);

// Oracle-n ranking: per instance, the n = |golds| candidates with lowest f.
PredictionMap ranking_mode(
    const std::map<std::string, std::vector<CandidateRelation>>& candidates,
    const PredictionMap& golds, bool* truncated = nullptr);

// Pluggable stand-in for LM-based phrase similarity.
class SimilarityProvider {
 public:
  // Token Jaccard over verbalizations with a character-trigram cosine
  // tie-breaker.
  static SimilarityProvider lexical();
  // Precomputed vectors, one relation per line: `raw_label v1 v2 ...`.
  static SimilarityProvider embedding_file(const std::string& path);

  // Symmetric; maximal for identical phrases.
  double similarity(const VerbalizedRelation& a, const VerbalizedRelation& b) const;

 private:
  bool lexical_ = true;
  std::map<std::string, std::vector<double>> embeddings_;
};

// IoU of the top-M schema relations by model likelihood (f ascending,
// teacher-forced) and the top-M by similarity to the gold verbalization.
double h_index(const ModelParams& params, const FormattedSample& sample,
               const RelationLabel& gold, const RelationSchema& schema,
               std::size_t m, const SimilarityProvider& provider);

// Threshold-mode predictions for a whole dataset via decode + select.
PredictionMap predict_threshold(const ModelParams& params, const Dataset& dataset,
                                const RelationSchema& schema, const RelationTrie& trie,
                                TemplateStyle style, const DecodeConfig& config);

// All decoded candidates per instance (for ranking mode and reports).
std::map<std::string, std::vector<CandidateRelation>> decode_dataset(
    const ModelParams& params, const Dataset& dataset, const RelationSchema& schema,
    const RelationTrie& trie, TemplateStyle style, const DecodeConfig& config);

PredictionMap gold_map(const Dataset& dataset);

// Trains and evaluates each ablation variant under identical seeds.
std::vector<std::pair<std::string, EvalReport>> run_ablation(
    const Dataset& train_set, const Dataset& dev_set, const Dataset& test_set,
    const RelationSchema& schema, const RelationTrie& trie, const TrainConfig& base,
    const std::vector<std::string>& grid, bool exclude_no_relation = false);

// One train/eval per balance-factor value, shared seed; records sorted by mu.
std::vector<std::pair<double, EvalReport>> sweep_mu(
    const Dataset& train_set, const Dataset& dev_set, const Dataset& test_set,
    const RelationSchema& schema, const RelationTrie& trie, const TrainConfig& base,
    const std::vector<double>& values, bool exclude_no_relation = false);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_summary(std::ostream& out, const EvalReport& report);

}  // namespace cptuning
