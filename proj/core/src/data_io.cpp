#include "cptuning/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cptuning/errors.hpp"
#include "cptuning/rng.hpp"

namespace cptuning {

using nlohmann::json;

namespace {

TokenList tokenize(const std::string& text) {
  TokenList out;
  std::istringstream in(text);
  Token tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<json> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  // Either one top-level JSON array or one object per line.
  char first = 0;
  while (in.get(first) && (first == ' ' || first == '\n' || first == '\t' || first == '\r')) {
  }
  in.seekg(0);
  std::vector<json> records;
  if (first == '[') {
    json arr;
    try {
      in >> arr;
    } catch (const json::exception& e) {
      throw DataError("malformed JSON in " + path + ": " + e.what());
    }
    for (auto& r : arr) records.push_back(std::move(r));
  } else {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw DataError("malformed record at " + path + ":" + std::to_string(line_no) +
                        ": " + e.what());
      }
    }
  }
  return records;
}

RelationSchema schema_from_labels(std::set<std::string> labels) {
  return make_schema({labels.begin(), labels.end()});
}

void check_instance(const REInstance& inst) {
  if (inst.subj_span.begin >= inst.subj_span.end ||
      inst.subj_span.end > inst.tokens.size() ||
      inst.obj_span.begin >= inst.obj_span.end ||
      inst.obj_span.end > inst.tokens.size()) {
    throw DataError("instance '" + inst.id + "': entity span out of bounds");
  }
}

}  // namespace

Dataset load_tacred_style(const std::string& path) {
  auto records = read_records(path);
  Dataset ds;
  ds.name = path;
  std::set<std::string> labels;
  std::set<std::string> seen_ids;
  std::size_t idx = 0;
  for (const auto& rec : records) {
    ++idx;
    try {
      REInstance inst;
      inst.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                   : "rec-" + std::to_string(idx);
      const auto& toks = rec.contains("token") ? rec.at("token") : rec.at("tokens");
      inst.tokens = toks.get<TokenList>();
      // Native indices are inclusive; spans are half-open.
      inst.subj_span = {rec.at("subj_start").get<std::size_t>(),
                        rec.at("subj_end").get<std::size_t>() + 1};
      inst.obj_span = {rec.at("obj_start").get<std::size_t>(),
                       rec.at("obj_end").get<std::size_t>() + 1};
      if (rec.contains("subj_type")) inst.subj_type = rec.at("subj_type").get<std::string>();
      if (rec.contains("obj_type")) inst.obj_type = rec.at("obj_type").get<std::string>();
      std::string relation = rec.at("relation").get<std::string>();
      inst.gold_relations.insert(RelationLabel{relation});
      labels.insert(relation);
      check_instance(inst);
      if (!seen_ids.insert(inst.id).second) {
        throw DataError("duplicate instance id '" + inst.id + "'");
      }
      ds.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw DataError("malformed record " + std::to_string(idx) + " in " + path + ": " +
                      e.what());
    }
  }
  ds.schema = schema_from_labels(std::move(labels));
  return ds;
}

Dataset load_nyt_style(const std::string& path) {
  auto records = read_records(path);
  Dataset ds;
  ds.name = path;
  std::set<std::string> labels;
  std::size_t idx = 0;
  for (const auto& rec : records) {
    ++idx;
    TokenList tokens;
    std::vector<std::tuple<std::string, std::string, std::string>> triples;
    try {
      if (rec.contains("tokens")) {
        tokens = rec.at("tokens").get<TokenList>();
      } else {
        tokens = tokenize(rec.at("sentText").get<std::string>());
      }
      for (const auto& mention : rec.at("relationMentions")) {
        triples.emplace_back(mention.at("em1Text").get<std::string>(),
                             mention.at("em2Text").get<std::string>(),
                             mention.at("label").get<std::string>());
      }
    } catch (const json::exception& e) {
      throw DataError("malformed record " + std::to_string(idx) + " in " + path + ": " +
                      e.what());
    }

    auto find_span = [&](const std::string& text) -> Span {
      TokenList needle = tokenize(text);
      if (needle.empty()) throw DataError("empty entity mention in record " + std::to_string(idx));
      for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
          return {i, i + needle.size()};
        }
      }
      throw DataError("entity '" + text + "' not found in sentence of record " +
                      std::to_string(idx));
    };

    // Triples sharing an entity pair collapse into one multi-relation
    // instance.
    std::map<std::pair<Span, Span>, std::set<RelationLabel>,
             decltype([](const auto& a, const auto& b) {
               return std::tie(a.first.begin, a.first.end, a.second.begin, a.second.end) <
                      std::tie(b.first.begin, b.first.end, b.second.begin, b.second.end);
             })>
        groups;
    for (const auto& [subj, obj, label] : triples) {
      groups[{find_span(subj), find_span(obj)}].insert(RelationLabel{label});
      labels.insert(label);
    }
    std::size_t group_no = 0;
    for (const auto& [spans, golds] : groups) {
      REInstance inst;
      inst.id = "rec-" + std::to_string(idx) + "#" + std::to_string(group_no++);
      inst.tokens = tokens;
      inst.subj_span = spans.first;
      inst.obj_span = spans.second;
      inst.gold_relations = golds;
      check_instance(inst);
      ds.instances.push_back(std::move(inst));
    }
  }
  ds.schema = schema_from_labels(std::move(labels));
  return ds;
}

Dataset load_interchange(const std::string& path, const RelationSchema& schema,
                         const std::string& split) {
  auto records = read_records(path);
  Dataset ds;
  ds.name = path;
  ds.split = split;
  ds.schema = schema;
  std::set<std::string> seen_ids;
  std::size_t idx = 0;
  for (const auto& rec : records) {
    ++idx;
    try {
      REInstance inst;
      inst.id = rec.at("id").get<std::string>();
      inst.tokens = rec.at("tokens").get<TokenList>();
      inst.subj_span = {rec.at("subj_span").at(0).get<std::size_t>(),
                        rec.at("subj_span").at(1).get<std::size_t>()};
      inst.obj_span = {rec.at("obj_span").at(0).get<std::size_t>(),
                       rec.at("obj_span").at(1).get<std::size_t>()};
      if (rec.contains("subj_type") && !rec.at("subj_type").is_null()) {
        inst.subj_type = rec.at("subj_type").get<std::string>();
      }
      if (rec.contains("obj_type") && !rec.at("obj_type").is_null()) {
        inst.obj_type = rec.at("obj_type").get<std::string>();
      }
      for (const auto& r : rec.at("relations")) {
        std::string raw = r.get<std::string>();
        if (!schema.contains(RelationLabel{raw})) {
          throw DataError("instance '" + inst.id + "': relation '" + raw +
                          "' not in schema");
        }
        inst.gold_relations.insert(RelationLabel{raw});
      }
      if (inst.gold_relations.empty()) {
        throw DataError("instance '" + inst.id + "' has no relations");
      }
      check_instance(inst);
      if (!seen_ids.insert(inst.id).second) {
        throw DataError("duplicate instance id '" + inst.id + "'");
      }
      ds.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw DataError("malformed record " + std::to_string(idx) + " in " + path + ": " +
                      e.what());
    }
  }
  return ds;
}

void save_interchange(const Dataset& dataset, std::ostream& out) {
  for (const auto& inst : dataset.instances) {
    json rec;
    rec["id"] = inst.id;
    rec["tokens"] = inst.tokens;
    rec["subj_span"] = {inst.subj_span.begin, inst.subj_span.end};
    rec["obj_span"] = {inst.obj_span.begin, inst.obj_span.end};
    if (inst.subj_type) rec["subj_type"] = *inst.subj_type;
    if (inst.obj_type) rec["obj_type"] = *inst.obj_type;
    std::vector<std::string> relations;
    for (const auto& r : inst.gold_relations) relations.push_back(r.raw);
    rec["relations"] = relations;
    out << rec.dump() << "\n";
  }
}

void save_interchange(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path);
  save_interchange(dataset, out);
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace {

struct SynthRelation {
  const char* raw;
  const char* subj_type;
  const char* obj_type;
  const char* surface;  // with {e1}/{e2} placeholders
  const char* cue;      // distinctive token used by the self-labeling rule
};

// Order fixed; epo pairs live in the first four entries.
constexpr SynthRelation kSynthRelations[] = {
    {"per:city_of_birth", "PERSON", "CITY", "{e1} was born in {e2} .", "born"},
    {"per:city_of_residence", "PERSON", "CITY", "{e1} lives in {e2} .", "lives"},
    {"org:founded_by", "PERSON", "ORGANIZATION", "{e1} founded {e2} .", "founded"},
    {"org:member_of", "PERSON", "ORGANIZATION", "{e1} belongs to {e2} .", "belongs"},
    {"per:city_of_death", "PERSON", "CITY", "{e1} died in {e2} .", "died"},
    {"per:employee_of", "PERSON", "ORGANIZATION", "{e1} works for {e2} .", "works"},
    {"per:schools_attended", "PERSON", "ORGANIZATION", "{e1} studied at {e2} .", "studied"},
    {"org:top_members/employees", "ORGANIZATION", "PERSON", "{e1} is led by {e2} .", "led"},
    {"per:spouse", "PERSON", "PERSON", "{e1} married {e2} .", "married"},
    {"no_relation", "PERSON", "PERSON", "{e1} met {e2} yesterday .", "met"},
};

struct SynthJoint {
  std::size_t first;
  std::size_t second;
  const char* surface;
  const char* cue;  // token unique to the joint surface
};

constexpr SynthJoint kSynthJoints[] = {
    {0, 1, "{e1} was born and still lives in {e2} .", "still"},
    {2, 3, "{e1} is the co-founder and chief executive of {e2} .", "co-founder"},
};

constexpr std::size_t kSynthRelationCount = std::size(kSynthRelations);

TokenList mention_for(const std::string& type, std::size_t base, Rng& rng) {
  std::size_t id = base + rng.uniform(10000);
  char buf[32];
  if (type == "PERSON") {
    TokenList m;
    std::snprintf(buf, sizeof(buf), "pfn%05zu", id);
    m.emplace_back(buf);
    std::snprintf(buf, sizeof(buf), "pln%05zu", base + rng.uniform(10000));
    m.emplace_back(buf);
    return m;
  }
  const char* prefix = type == "CITY" ? "city" : "org";
  std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, id);
  return {Token(buf)};
}

Dataset generate_split(const SynthSpec& spec, const RelationSchema& schema,
                       const std::string& split, std::size_t count,
                       std::size_t mention_base, Rng& rng) {
  std::vector<std::size_t> joint_ids;
  for (std::size_t j = 0; j < std::size(kSynthJoints); ++j) {
    if (kSynthJoints[j].first < spec.relation_count &&
        kSynthJoints[j].second < spec.relation_count) {
      joint_ids.push_back(j);
    }
  }
  const std::size_t filler_pool =
      spec.vocab_size > 60 ? spec.vocab_size - 60 : 1;

  Dataset ds;
  ds.name = "synthetic";
  ds.split = split;
  ds.schema = schema;
  for (std::size_t i = 0; i < count; ++i) {
    bool epo = !joint_ids.empty() && rng.uniform_real() < spec.epo_rate;
    std::string surface;
    std::set<RelationLabel> golds;
    const char* subj_type;
    const char* obj_type;
    if (epo) {
      const auto& joint = kSynthJoints[joint_ids[rng.uniform(joint_ids.size())]];
      surface = joint.surface;
      golds.insert(RelationLabel{kSynthRelations[joint.first].raw});
      golds.insert(RelationLabel{kSynthRelations[joint.second].raw});
      subj_type = kSynthRelations[joint.first].subj_type;
      obj_type = kSynthRelations[joint.first].obj_type;
    } else {
      const auto& rel = kSynthRelations[rng.uniform(spec.relation_count)];
      surface = rel.surface;
      golds.insert(RelationLabel{rel.raw});
      subj_type = rel.subj_type;
      obj_type = rel.obj_type;
    }

    REInstance inst;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06zu", split.c_str(), i);
    inst.id = idbuf;
    inst.subj_type = subj_type;
    inst.obj_type = obj_type;
    inst.gold_relations = std::move(golds);

    // Leading filler tokens, then the template with entity slots filled.
    std::size_t fillers = rng.uniform(3);
    for (std::size_t k = 0; k < fillers; ++k) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "w%03zu", rng.uniform(filler_pool));
      inst.tokens.emplace_back(buf);
    }
    TokenList subj = mention_for(subj_type, mention_base, rng);
    TokenList obj = mention_for(obj_type, mention_base, rng);
    for (const Token& word : tokenize(surface)) {
      if (word == "{e1}") {
        inst.subj_span = {inst.tokens.size(), inst.tokens.size() + subj.size()};
        inst.tokens.insert(inst.tokens.end(), subj.begin(), subj.end());
      } else if (word == "{e2}") {
        inst.obj_span = {inst.tokens.size(), inst.tokens.size() + obj.size()};
        inst.tokens.insert(inst.tokens.end(), obj.begin(), obj.end());
      } else {
        inst.tokens.push_back(word);
      }
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthSpec& spec) {
  if (spec.relation_count < 2 || spec.relation_count > kSynthRelationCount) {
    throw ConfigError("relation_count must be in [2, " +
                      std::to_string(kSynthRelationCount) + "]");
  }
  if (spec.epo_rate < 0.0 || spec.epo_rate > 1.0) {
    throw ConfigError("epo_rate must be in [0, 1]");
  }
  bool any_joint = false;
  for (const auto& joint : kSynthJoints) {
    if (joint.first < spec.relation_count && joint.second < spec.relation_count) {
      any_joint = true;
    }
  }
  if (spec.epo_rate > 0.0 && !any_joint) {
    throw ConfigError("epo_rate > 0 requires at least one co-expressible relation pair");
  }

  std::vector<std::string> labels;
  for (std::size_t i = 0; i < spec.relation_count; ++i) {
    labels.push_back(kSynthRelations[i].raw);
  }
  std::sort(labels.begin(), labels.end());
  SynthCorpus corpus;
  corpus.schema = make_schema(labels);

  Rng rng(spec.seed);
  // Mention id ranges keep the splits disjoint in entity mentions.
  corpus.train = generate_split(spec, corpus.schema, "train", spec.train_instances,
                                0, rng);
  corpus.dev = generate_split(spec, corpus.schema, "dev", spec.dev_instances,
                              10000, rng);
  corpus.test = generate_split(spec, corpus.schema, "test", spec.test_instances,
                               20000, rng);
  return corpus;
}

std::set<RelationLabel> synthetic_labels_of(const TokenList& sentence,
                                            std::size_t relation_count) {
  std::set<Token> words(sentence.begin(), sentence.end());
  std::set<RelationLabel> out;
  for (const auto& joint : kSynthJoints) {
    if (joint.first < relation_count && joint.second < relation_count &&
        words.contains(joint.cue)) {
      out.insert(RelationLabel{kSynthRelations[joint.first].raw});
      out.insert(RelationLabel{kSynthRelations[joint.second].raw});
      return out;
    }
  }
  for (std::size_t i = 0; i < relation_count && i < kSynthRelationCount; ++i) {
    if (words.contains(kSynthRelations[i].cue)) {
      out.insert(RelationLabel{kSynthRelations[i].raw});
      return out;
    }
  }
  return out;
}

Dataset low_resource_sample(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("low-resource N must be >= 1");
  // Classes are distinct gold-relation sets; an EPO pair is its own class.
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    std::string key;
    for (const auto& r : dataset.instances[i].gold_relations) {
      if (!key.empty()) key.push_back('+');
      key += r.raw;
    }
    classes[key].push_back(i);
  }

  Rng rng(seed);
  std::set<std::size_t> chosen;
  for (auto& [key, ids] : classes) {
    rng.shuffle(ids);
    for (std::size_t i = 0; i < std::min(n, ids.size()); ++i) chosen.insert(ids[i]);
  }

  Dataset out;
  out.name = dataset.name;
  out.split = dataset.split;
  out.schema = dataset.schema;
  for (std::size_t i : chosen) out.instances.push_back(dataset.instances[i]);
  return out;
}

}  // namespace cptuning
