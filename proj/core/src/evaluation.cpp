#include "cptuning/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cptuning/errors.hpp"

namespace cptuning {

using nlohmann::json;

namespace {

bool is_no_relation(const RelationLabel& label) {
  return label.raw == "no_relation" || label.raw == "no relation";
}

}  // namespace

EvalReport micro_f1(const PredictionMap& predictions, const PredictionMap& golds,
                    bool exclude_no_relation) {
  if (predictions.size() != golds.size()) {
    throw ConstraintError("micro_f1: prediction/gold id sets differ in size");
  }
  EvalReport report;
  for (const auto& [id, gold_set] : golds) {
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      throw ConstraintError("micro_f1: no prediction for id '" + id + "'");
    }
    std::set<RelationLabel> pred = it->second;
    std::set<RelationLabel> gold = gold_set;
    if (exclude_no_relation) {
      std::erase_if(pred, is_no_relation);
      std::erase_if(gold, is_no_relation);
    }
    for (const auto& r : pred) {
      if (gold.contains(r)) {
        ++report.tp;
        ++report.per_relation[r.raw][0];
      } else {
        ++report.fp;
        ++report.per_relation[r.raw][1];
      }
    }
    for (const auto& r : gold) {
      if (!pred.contains(r)) {
        ++report.fn;
        ++report.per_relation[r.raw][2];
      }
    }
  }
  const double tp = static_cast<double>(report.tp);
  report.precision = report.tp + report.fp == 0
                         ? 0.0
                         : tp / static_cast<double>(report.tp + report.fp);
  report.recall = report.tp + report.fn == 0
                      ? 0.0
                      : tp / static_cast<double>(report.tp + report.fn);
  report.f1 = report.precision + report.recall > 0.0
                  ? 2.0 * report.precision * report.recall /
                        (report.precision + report.recall)
                  : 0.0;
  return report;
}

PredictionMap ranking_mode(
    const std::map<std::string, std::vector<CandidateRelation>>& candidates,
    const PredictionMap& golds, bool* truncated) {
  PredictionMap out;
  if (truncated) *truncated = false;
  for (const auto& [id, gold_set] : golds) {
    auto it = candidates.find(id);
    if (it == candidates.end()) {
      throw ConstraintError("ranking_mode: no candidates for id '" + id + "'");
    }
    std::vector<CandidateRelation> sorted = it->second;
    std::sort(sorted.begin(), sorted.end(),
              [](const CandidateRelation& a, const CandidateRelation& b) {
                if (a.f != b.f) return a.f < b.f;
                return a.tokens < b.tokens;
              });
    const std::size_t n = gold_set.size();
    if (sorted.size() < n && truncated) *truncated = true;
    std::set<RelationLabel>& preds = out[id];
    for (std::size_t i = 0; i < std::min(n, sorted.size()); ++i) {
      preds.insert(sorted[i].label);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarity provider and H@M
// ---------------------------------------------------------------------------

SimilarityProvider SimilarityProvider::lexical() {
  SimilarityProvider p;
  p.lexical_ = true;
  return p;
}

SimilarityProvider SimilarityProvider::embedding_file(const std::string& path) {
  SimilarityProvider p;
  p.lexical_ = false;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string label;
    ls >> label;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (vec.empty()) throw ConfigError("embedding line without values: " + line);
    p.embeddings_[label] = std::move(vec);
  }
  return p;
}

namespace {

std::set<std::string> trigrams(const TokenList& tokens) {
  std::string joined;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {  // drop trailing <E>
    if (i) joined.push_back(' ');
    joined += tokens[i];
  }
  std::set<std::string> out;
  for (std::size_t i = 0; i + 3 <= joined.size(); ++i) out.insert(joined.substr(i, 3));
  return out;
}

double jaccard_sets(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.contains(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

double SimilarityProvider::similarity(const VerbalizedRelation& a,
                                      const VerbalizedRelation& b) const {
  if (!lexical_) {
    auto ia = embeddings_.find(a.label.raw);
    auto ib = embeddings_.find(b.label.raw);
    if (ia == embeddings_.end() || ib == embeddings_.end()) {
      throw ConfigError("missing embedding for relation '" +
                        (ia == embeddings_.end() ? a.label.raw : b.label.raw) + "'");
    }
    const auto& va = ia->second;
    const auto& vb = ib->second;
    if (va.size() != vb.size()) throw ConfigError("embedding dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      dot += va[i] * vb[i];
      na += va[i] * va[i];
      nb += vb[i] * vb[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
  }
  // Token Jaccard over the verbalization (without <E>), with a character
  // trigram cosine surrogate as a small tie-breaker.
  std::set<std::string> ta(a.tokens.begin(), a.tokens.end() - 1);
  std::set<std::string> tb(b.tokens.begin(), b.tokens.end() - 1);
  double word_jaccard = jaccard_sets(ta, tb);
  double tri = jaccard_sets(trigrams(a.tokens), trigrams(b.tokens));
  return word_jaccard + 1e-3 * tri;
}

double h_index(const ModelParams& params, const FormattedSample& sample,
               const RelationLabel& gold, const RelationSchema& schema,
               std::size_t m, const SimilarityProvider& provider) {
  if (m < 1 || m > schema.relations.size()) {
    throw BoundsError("h_index: M outside [1, |schema|]");
  }
  const VerbalizedRelation* gold_rel = schema.find(gold);
  if (!gold_rel) throw DataError("h_index: gold relation '" + gold.raw + "' not in schema");

  // C1: top-M by teacher-forced likelihood, f ascending.
  std::vector<std::pair<double, std::string>> by_f;
  for (const auto& rel : schema.relations) {
    auto lps = sequence_logprob(params, sample, rel.tokens);
    double f = 0.0;
    for (double lp : lps) f -= lp;
    f /= std::pow(static_cast<double>(rel.tokens.size()), 0.6);
    by_f.emplace_back(f, rel.label.raw);
  }
  std::sort(by_f.begin(), by_f.end());
  std::set<std::string> c1;
  for (std::size_t i = 0; i < m; ++i) c1.insert(by_f[i].second);

  // C2: top-M by similarity to the gold verbalization, descending.
  std::vector<std::pair<double, std::string>> by_sim;
  for (const auto& rel : schema.relations) {
    by_sim.emplace_back(-provider.similarity(rel, *gold_rel), rel.label.raw);
  }
  std::sort(by_sim.begin(), by_sim.end());
  std::set<std::string> c2;
  for (std::size_t i = 0; i < m; ++i) c2.insert(by_sim[i].second);

  std::size_t inter = 0;
  for (const auto& x : c1) inter += c2.contains(x);
  std::size_t uni = c1.size() + c2.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Dataset-level prediction helpers
// ---------------------------------------------------------------------------

PredictionMap gold_map(const Dataset& dataset) {
  PredictionMap out;
  for (const auto& inst : dataset.instances) out[inst.id] = inst.gold_relations;
  return out;
}

std::map<std::string, std::vector<CandidateRelation>> decode_dataset(
    const ModelParams& params, const Dataset& dataset, const RelationSchema& schema,
    const RelationTrie& trie, TemplateStyle style, const DecodeConfig& config) {
  std::map<std::string, std::vector<CandidateRelation>> out;
  for (const auto& inst : dataset.instances) {
    auto sample = render(inst, schema, style);
    out[inst.id] = pgc_decode(params, sample, trie, schema, config);
  }
  return out;
}

PredictionMap predict_threshold(const ModelParams& params, const Dataset& dataset,
                                const RelationSchema& schema, const RelationTrie& trie,
                                TemplateStyle style, const DecodeConfig& config) {
  PredictionMap out;
  for (const auto& inst : dataset.instances) {
    auto sample = render(inst, schema, style);
    auto candidates = pgc_decode(params, sample, trie, schema, config);
    std::set<RelationLabel>& preds = out[inst.id];
    for (const auto& cand : select(candidates, config)) preds.insert(cand.label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation and sweep runners
// ---------------------------------------------------------------------------

namespace {

EvalReport train_and_eval(const Dataset& train_set, const Dataset& dev_set,
                          const Dataset& test_set, const RelationSchema& schema,
                          const RelationTrie& trie, const TrainConfig& config,
                          bool exclude_no_relation) {
  auto result = train(train_set, dev_set, schema, trie, config);
  DecodeConfig dc;
  dc.beam_size = config.beam_size;
  dc.alpha = config.alpha;
  dc.lambda = config.lambda;
  dc.convention = config.convention;
  auto preds = predict_threshold(result.params, test_set, schema, trie, config.style, dc);
  EvalReport report = micro_f1(preds, gold_map(test_set), exclude_no_relation);
  report.seed = config.seed;
  return report;
}

}  // namespace

std::vector<std::pair<std::string, EvalReport>> run_ablation(
    const Dataset& train_set, const Dataset& dev_set, const Dataset& test_set,
    const RelationSchema& schema, const RelationTrie& trie, const TrainConfig& base,
    const std::vector<std::string>& grid, bool exclude_no_relation) {
  std::vector<std::pair<std::string, EvalReport>> out;
  for (const auto& variant : grid) {
    TrainConfig config = base;
    config.ablation = variant;
    out.emplace_back(variant, train_and_eval(train_set, dev_set, test_set, schema,
                                             trie, config, exclude_no_relation));
  }
  return out;
}

std::vector<std::pair<double, EvalReport>> sweep_mu(
    const Dataset& train_set, const Dataset& dev_set, const Dataset& test_set,
    const RelationSchema& schema, const RelationTrie& trie, const TrainConfig& base,
    const std::vector<double>& values, bool exclude_no_relation) {
  if (values.empty()) throw ConfigError("sweep_mu: empty value list");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, EvalReport>> out;
  for (double mu : sorted) {
    TrainConfig config = base;
    config.mu = mu;
    out.emplace_back(mu, train_and_eval(train_set, dev_set, test_set, schema, trie,
                                        config, exclude_no_relation));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

void write_report_json(std::ostream& out, const EvalReport& report) {
  json rec;
  rec["mode"] = report.mode;
  rec["precision"] = report.precision;
  rec["recall"] = report.recall;
  rec["f1"] = report.f1;
  rec["tp"] = report.tp;
  rec["fp"] = report.fp;
  rec["fn"] = report.fn;
  json per;
  for (const auto& [label, counts] : report.per_relation) {
    per[label] = {{"tp", counts[0]}, {"fp", counts[1]}, {"fn", counts[2]}};
  }
  rec["per_relation"] = per;
  if (!report.h_at.empty()) {
    json h;
    for (const auto& [m, v] : report.h_at) h[std::to_string(m)] = v;
    rec["h_at"] = h;
  }
  if (report.truncated_ranking) rec["truncated_ranking"] = true;
  if (!report.config_hash.empty()) rec["config_hash"] = report.config_hash;
  rec["seed"] = report.seed;
  out << rec.dump() << "\n";
}

void write_report_summary(std::ostream& out, const EvalReport& report) {
  out << std::fixed << std::setprecision(4);
  out << "mode       " << report.mode << "\n";
  out << "precision  " << report.precision << "\n";
  out << "recall     " << report.recall << "\n";
  out << "micro-F1   " << report.f1 << "\n";
  out << "tp/fp/fn   " << report.tp << "/" << report.fp << "/" << report.fn << "\n";
  for (const auto& [m, v] : report.h_at) {
    out << "H@" << m << "       " << v << "\n";
  }
  if (!report.per_relation.empty()) {
    out << "per-relation (tp fp fn):\n";
    for (const auto& [label, counts] : report.per_relation) {
      out << "  " << label << "  " << counts[0] << " " << counts[1] << " "
          << counts[2] << "\n";
    }
  }
}

}  // namespace cptuning
