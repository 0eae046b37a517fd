#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cptuning/schema.hpp"
#include "cptuning/templating.hpp"

namespace cptuning {

struct Dataset {
  std::string name;
  std::string split;  // train | dev | test
  std::vector<REInstance> instances;
  RelationSchema schema;
};

// TACRED-style records: token list, inclusive subject/object index pairs,
// entity types, a single relation label. Accepts a JSON array or one JSON
// object per line.
Dataset load_tacred_style(const std::string& path);

// NYT-style records: a sentence plus a triple list; triples sharing an
// entity pair group into one multi-relation instance.
Dataset load_nyt_style(const std::string& path);

// Internal interchange format, one JSON object per line with fields
// id/tokens/subj_span/obj_span/subj_type/obj_type/relations.
Dataset load_interchange(const std::string& path, const RelationSchema& schema,
                         const std::string& split = "train");
void save_interchange(const Dataset& dataset, const std::string& path);
void save_interchange(const Dataset& dataset, std::ostream& out);

struct SynthSpec {
  std::size_t relation_count = 10;  // includes "no_relation"
  std::size_t vocab_size = 200;
  std::size_t train_instances = 2000;
  std::size_t dev_instances = 500;
  std::size_t test_instances = 500;
  double epo_rate = 0.3;  // fraction of instances drawn from joint templates
  std::uint64_t seed = 7;
};

struct SynthCorpus {
  Dataset train;
  Dataset dev;
  Dataset test;
  RelationSchema schema;
};

// Deterministic synthetic corpus with entity-pair-overlap instances. Each
// relation has its own surface template; EPO instances use templates that
// express two relations at once. Entity mentions are disjoint across splits.
SynthCorpus generate_synthetic(const SynthSpec& spec);

// Maps each emitted sentence back to its gold set using only the surface
// cue words. Used as a self-oracle over generator output.
std::set<RelationLabel> synthetic_labels_of(const TokenList& sentence,
                                            std::size_t relation_count);

// Per class (distinct gold-relation set), uniformly samples min(n, class
// size) instances. Deterministic given the seed.
Dataset low_resource_sample(const Dataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace cptuning
