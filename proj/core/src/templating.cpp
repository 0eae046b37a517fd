#include "cptuning/templating.hpp"

#include <algorithm>

#include "cptuning/errors.hpp"

namespace cptuning {

TemplateStyle parse_template_style(const std::string& name) {
  if (name == "s1") return TemplateStyle::s1;
  if (name == "s2") return TemplateStyle::s2;
  throw ConfigError("unknown template style '" + name + "' (expected s1 or s2)");
}

std::string to_string(TemplateStyle style) {
  return style == TemplateStyle::s1 ? "s1" : "s2";
}

namespace {

void check_span(const REInstance& inst, const Span& span, const char* which) {
  if (span.begin >= span.end || span.end > inst.tokens.size()) {
    throw DataError("instance '" + inst.id + "': " + which + " span out of bounds");
  }
}

TokenList slice(const TokenList& tokens, const Span& span) {
  return TokenList(tokens.begin() + static_cast<std::ptrdiff_t>(span.begin),
                   tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
}

void append(TokenList& out, const TokenList& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

FormattedSample render(const REInstance& instance, const RelationSchema& schema,
                       TemplateStyle style) {
  check_span(instance, instance.subj_span, "subject");
  check_span(instance, instance.obj_span, "object");
  if (instance.subj_span.overlaps(instance.obj_span)) {
    throw DataError("instance '" + instance.id + "': entity spans overlap");
  }
  if (instance.gold_relations.empty()) {
    throw DataError("instance '" + instance.id + "': no gold relations");
  }
  if (style == TemplateStyle::s2 &&
      (!instance.subj_type.has_value() || !instance.obj_type.has_value())) {
    throw TemplateError("instance '" + instance.id +
                        "': style s2 requires subject and object types");
  }

  FormattedSample sample;
  sample.instance_id = instance.id;
  sample.template_style = style;

  // Source: sentence followed by the fixed cloze with all three slots masked.
  sample.source_tokens = instance.tokens;
  for (const Token& t : {Token("The"), Token("relation"), Token("between"),
                         kSentinelX, Token("and"), kSentinelY, Token("is"),
                         kSentinelZ, Token(".")}) {
    sample.source_tokens.push_back(t);
  }

  // Prefix z: the recovered entity slots, ending at <Z>. Only the relation
  // part after <Z> is ever generated.
  sample.prefix_tokens.push_back(kSentinelX);
  if (style == TemplateStyle::s2) {
    sample.prefix_tokens.push_back(*instance.subj_type);
    sample.prefix_tokens.push_back(":");
  }
  append(sample.prefix_tokens, slice(instance.tokens, instance.subj_span));
  sample.prefix_tokens.push_back(kSentinelY);
  if (style == TemplateStyle::s2) {
    sample.prefix_tokens.push_back(*instance.obj_type);
    sample.prefix_tokens.push_back(":");
  }
  append(sample.prefix_tokens, slice(instance.tokens, instance.obj_span));
  sample.prefix_tokens.push_back(kSentinelZ);

  for (const RelationLabel& label : instance.gold_relations) {
    const VerbalizedRelation* rel = schema.find(label);
    if (rel == nullptr) {
      throw DataError("instance '" + instance.id + "': gold relation '" + label.raw +
                      "' not in schema");
    }
    sample.gold_relation_tokens.push_back(rel->tokens);
  }
  std::sort(sample.gold_relation_tokens.begin(), sample.gold_relation_tokens.end());
  return sample;
}

TokenList join_target(const TokenList& prefix, const TokenList& relation) {
  if (prefix.empty() || prefix.back() != kSentinelZ) {
    throw TemplateError("prefix must end with " + kSentinelZ);
  }
  TokenList out = prefix;
  append(out, relation);
  return out;
}

}  // namespace cptuning
