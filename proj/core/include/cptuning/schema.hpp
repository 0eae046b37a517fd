#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace cptuning {

using Token = std::string;
using TokenList = std::vector<Token>;

// Sentinel tokens. <X>/<Y>/<Z> mask slots in the corrupted source text,
// <E> terminates every relation phrase.
inline const Token kSentinelX = "<X>";
inline const Token kSentinelY = "<Y>";
inline const Token kSentinelZ = "<Z>";
inline const Token kSentinelEnd = "<E>";

struct RelationLabel {
  std::string raw;

  bool operator==(const RelationLabel&) const = default;
  auto operator<=>(const RelationLabel&) const = default;
};

// A relation label rewritten as a short word phrase, terminated by <E>.
struct VerbalizedRelation {
  RelationLabel label;
  TokenList tokens;  // last element is kSentinelEnd
};

struct RelationSchema {
  std::vector<VerbalizedRelation> relations;
  std::map<RelationLabel, std::string> overrides;
  bool includes_no_relation = false;

  const VerbalizedRelation* find(const RelationLabel& label) const;
  bool contains(const RelationLabel& label) const { return find(label) != nullptr; }
};

// Rewrites a dataset-native relation label as a word phrase. An override
// phrase wins when present; otherwise "per:"/"org:" prefixes expand to
// "person"/"organization", "_" breaks words, "/" reads as "or", and known
// compounds ("stateorprovince") are split. The terminal <E> is appended.
VerbalizedRelation verbalize(const RelationLabel& label,
                             const std::map<RelationLabel, std::string>& overrides);

// Builds a schema from raw labels, applying overrides.
RelationSchema make_schema(const std::vector<std::string>& raw_labels,
                           const std::map<RelationLabel, std::string>& overrides = {});

// One line per relation: `raw_label <TAB> optional_override`; '#' comments.
RelationSchema load_schema(const std::string& path);

// Prefix tree over the verbalized relations. Immutable after build; safe to
// share read-only across threads.
class RelationTrie {
 public:
  struct Node {
    Token token;                        // empty for the root
    std::map<Token, int> children;      // token -> node index, ordered
    int depth = 0;
    bool terminal = false;              // token == <E>
    int relation_index = -1;            // schema index when terminal
  };

  static RelationTrie build(const RelationSchema& schema);

  // Children tokens of the node reached by `path`; empty iff the path ends
  // at <E>. Throws ConstraintError when the path is not in the trie.
  std::set<Token> allowed_next(const TokenList& path) const;

  // Distinct tokens appearing at `depth` (1-based). Throws BoundsError when
  // depth is outside [1, depth()].
  const std::set<Token>& layer_tokens(int depth) const;

  int depth() const { return max_depth_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t path_count() const { return path_count_; }

  // Node index reached by `path`, or -1 when the path is not in the trie.
  int walk(const TokenList& path) const;

 private:
  std::vector<Node> nodes_;                  // nodes_[0] is the root
  std::vector<std::set<Token>> layers_;      // layers_[i-1] = tokens at depth i
  int max_depth_ = 0;
  std::size_t path_count_ = 0;
};

// All distinct relation-phrase tokens of a schema, <E> included.
std::set<Token> schema_token_set(const RelationSchema& schema);

}  // namespace cptuning
