#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cptuning/schema.hpp"

namespace cptuning {

// Half-open token index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool overlaps(const Span& other) const {
    return begin < other.end && other.begin < end;
  }
  bool operator==(const Span&) const = default;
};

struct REInstance {
  std::string id;
  TokenList tokens;  // the sentence
  Span subj_span;
  Span obj_span;
  std::optional<std::string> subj_type;
  std::optional<std::string> obj_type;
  std::set<RelationLabel> gold_relations;  // non-empty; >1 only for EPO data
};

enum class TemplateStyle { s1, s2 };

TemplateStyle parse_template_style(const std::string& name);
std::string to_string(TemplateStyle style);

// A rendered instance: the sentinel-corrupted source text, the known target
// prefix z, and the gold relation phrases.
struct FormattedSample {
  std::string instance_id;
  TokenList source_tokens;   // contains <X>, <Y>, <Z> exactly once each
  TokenList prefix_tokens;   // ends with <Z>
  std::vector<TokenList> gold_relation_tokens;
  TemplateStyle template_style = TemplateStyle::s1;
};

// Renders an instance against the schema. Style s2 additionally places
// entity types (followed by ':') before each mention in the prefix and
// requires both types to be present.
FormattedSample render(const REInstance& instance, const RelationSchema& schema,
                       TemplateStyle style);

// t = z ++ r. The inverse of the (z, r) decomposition.
TokenList join_target(const TokenList& prefix, const TokenList& relation);

}  // namespace cptuning
