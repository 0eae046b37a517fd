#include "cptuning/schema.hpp"

#include <fstream>
#include <sstream>

#include "cptuning/errors.hpp"

namespace cptuning {

namespace {

const std::map<std::string, std::vector<std::string>>& compound_expansions() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"stateorprovince", {"state", "or", "province"}},
      {"stateorprovinces", {"state", "or", "provinces"}},
  };
  return table;
}

TokenList split_whitespace(const std::string& text) {
  TokenList out;
  std::istringstream in(text);
  Token tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

const VerbalizedRelation* RelationSchema::find(const RelationLabel& label) const {
  for (const auto& rel : relations) {
    if (rel.label == label) return &rel;
  }
  return nullptr;
}

VerbalizedRelation verbalize(const RelationLabel& label,
                             const std::map<RelationLabel, std::string>& overrides) {
  if (label.raw.empty()) throw SchemaError("verbalize: empty relation label");

  VerbalizedRelation out;
  out.label = label;

  if (auto it = overrides.find(label); it != overrides.end()) {
    out.tokens = split_whitespace(it->second);
    if (out.tokens.empty()) {
      throw SchemaError("verbalize: empty override phrase for label '" + label.raw + "'");
    }
    out.tokens.push_back(kSentinelEnd);
    return out;
  }

  std::string body = label.raw;
  if (body.rfind("per:", 0) == 0) {
    out.tokens.push_back("person");
    body = body.substr(4);
  } else if (body.rfind("org:", 0) == 0) {
    out.tokens.push_back("organization");
    body = body.substr(4);
  }

  // '_' and '/' both break tokens; '/' additionally reads as "or".
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (auto it = compound_expansions().find(word); it != compound_expansions().end()) {
      for (const auto& part : it->second) out.tokens.push_back(part);
    } else {
      out.tokens.push_back(word);
    }
    word.clear();
  };
  for (char c : body) {
    if (c == '_') {
      flush();
    } else if (c == '/') {
      flush();
      out.tokens.push_back("or");
    } else {
      word.push_back(c);
    }
  }
  flush();

  if (out.tokens.empty()) {
    throw SchemaError("verbalize: label '" + label.raw + "' yields no tokens");
  }
  out.tokens.push_back(kSentinelEnd);
  return out;
}

RelationSchema make_schema(const std::vector<std::string>& raw_labels,
                           const std::map<RelationLabel, std::string>& overrides) {
  RelationSchema schema;
  schema.overrides = overrides;
  for (const auto& raw : raw_labels) {
    RelationLabel label{raw};
    if (schema.contains(label)) {
      throw SchemaError("duplicate relation label '" + raw + "'");
    }
    schema.relations.push_back(verbalize(label, overrides));
    if (raw == "no_relation" || raw == "no relation") schema.includes_no_relation = true;
  }
  return schema;
}

RelationSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);

  std::vector<std::string> labels;
  std::map<RelationLabel, std::string> overrides;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    auto first = trimmed.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (trimmed[first] == '#') continue;

    auto tab = line.find('\t');
    std::string raw = tab == std::string::npos ? line : line.substr(0, tab);
    // Trim surrounding spaces from the label.
    auto b = raw.find_first_not_of(" \t");
    auto e = raw.find_last_not_of(" \t");
    if (b == std::string::npos) {
      throw DataError("schema file " + path + ":" + std::to_string(line_no) + ": empty label");
    }
    raw = raw.substr(b, e - b + 1);
    labels.push_back(raw);
    if (tab != std::string::npos) {
      std::string phrase = line.substr(tab + 1);
      if (!split_whitespace(phrase).empty()) {
        overrides[RelationLabel{raw}] = phrase;
      }
    }
  }
  return make_schema(labels, overrides);
}

RelationTrie RelationTrie::build(const RelationSchema& schema) {
  RelationTrie trie;
  trie.nodes_.push_back(Node{});  // root

  for (std::size_t ri = 0; ri < schema.relations.size(); ++ri) {
    const auto& rel = schema.relations[ri];
    if (rel.tokens.empty() || rel.tokens.back() != kSentinelEnd) {
      throw SchemaError("relation '" + rel.label.raw + "' is not <E>-terminated");
    }
    int node = 0;
    for (std::size_t i = 0; i < rel.tokens.size(); ++i) {
      const Token& tok = rel.tokens[i];
      auto& children = trie.nodes_[node].children;
      auto it = children.find(tok);
      if (it == children.end()) {
        int idx = static_cast<int>(trie.nodes_.size());
        Node n;
        n.token = tok;
        n.depth = static_cast<int>(i) + 1;
        n.terminal = (tok == kSentinelEnd);
        trie.nodes_.push_back(n);
        trie.nodes_[node].children.emplace(tok, idx);
        node = idx;
      } else {
        node = it->second;
      }
      int depth = static_cast<int>(i) + 1;
      if (depth > static_cast<int>(trie.layers_.size())) trie.layers_.resize(depth);
      trie.layers_[depth - 1].insert(tok);
      if (depth > trie.max_depth_) trie.max_depth_ = depth;
    }
    Node& leaf = trie.nodes_[node];
    if (leaf.relation_index >= 0) {
      throw SchemaError("duplicate verbalization: labels '" +
                        schema.relations[leaf.relation_index].label.raw + "' and '" +
                        rel.label.raw + "' share the same token sequence");
    }
    leaf.relation_index = static_cast<int>(ri);
    ++trie.path_count_;
  }
  return trie;
}

int RelationTrie::walk(const TokenList& path) const {
  int node = 0;
  for (const Token& tok : path) {
    const auto& children = nodes_[node].children;
    auto it = children.find(tok);
    if (it == children.end()) return -1;
    node = it->second;
  }
  return node;
}

std::set<Token> RelationTrie::allowed_next(const TokenList& path) const {
  int node = walk(path);
  if (node < 0) throw ConstraintError("path is not a valid trie prefix");
  std::set<Token> out;
  for (const auto& [tok, idx] : nodes_[node].children) out.insert(tok);
  return out;
}

const std::set<Token>& RelationTrie::layer_tokens(int depth) const {
  if (depth < 1 || depth > max_depth_) {
    throw BoundsError("layer depth " + std::to_string(depth) + " outside [1, " +
                      std::to_string(max_depth_) + "]");
  }
  return layers_[depth - 1];
}

std::set<Token> schema_token_set(const RelationSchema& schema) {
  std::set<Token> out;
  for (const auto& rel : schema.relations) {
    for (const auto& tok : rel.tokens) out.insert(tok);
  }
  out.insert(kSentinelEnd);
  return out;
}

}  // namespace cptuning
