#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "cptuning/decoding.hpp"
#include "cptuning/errors.hpp"
#include "test_util.hpp"

using namespace cptuning;
using cptuning::testing::random_params;
using cptuning::testing::random_schema;
using cptuning::testing::simple_sample;

TEST_CASE("score spot values") {
  // Two tokens of probability 0.5 each, alpha = 0.6.
  double lp = std::log(0.5);
  // 2 ln 2 / 2^0.6 = 0.9146132 (exact to the digits shown).
  CHECK(score({"a", "<E>"}, {lp, lp}, 0.6) == doctest::Approx(0.914613).epsilon(1e-6));

  CHECK(score({"a", "b", "<E>"}, {0.0, 0.0, 0.0}, 0.6) == 0.0);

  // alpha = 0 disables the penalty.
  CHECK(score({"a", "b", "<E>"}, {lp, lp, lp}, 0.0) ==
        doctest::Approx(-3.0 * lp).epsilon(1e-12));

  CHECK_THROWS_AS(score({}, {}, 0.6), ConstraintError);
  CHECK_THROWS_AS(score({"a"}, {0.5}, 0.6), NumericError);
}

TEST_CASE("score is strictly monotone in any token probability") {
  std::vector<double> lps{-0.3, -1.2, -0.05};
  TokenList tokens{"a", "b", "<E>"};
  double base = score(tokens, lps, 0.6);
  for (std::size_t i = 0; i < lps.size(); ++i) {
    auto worse = lps;
    worse[i] -= 0.1;  // lower probability
    CHECK(score(tokens, worse, 0.6) > base);
  }
}

TEST_CASE("exhaustive beam returns every schema relation") {
  Rng rng(101);
  auto schema = random_schema(rng, 6);
  auto trie = RelationTrie::build(schema);
  auto sample = simple_sample(schema);
  auto params = random_params(schema, trie, sample, rng);

  DecodeConfig config;
  config.beam_size = schema.relations.size() + 5;
  auto candidates = pgc_decode(params, sample, trie, schema, config);
  REQUIRE(candidates.size() == schema.relations.size());
  std::set<TokenList> seen;
  for (const auto& cand : candidates) {
    CHECK(seen.insert(cand.tokens).second);  // distinct
    CHECK(trie.walk(cand.tokens) >= 0);
    // Sorted by f ascending.
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    CHECK(candidates[i - 1].f <= candidates[i].f);
  }
}

TEST_CASE("beam cannot exceed the number of trie paths") {
  auto schema = make_schema({"r0", "r1", "r2"},
                            {{RelationLabel{"r0"}, "aa"},
                             {RelationLabel{"r1"}, "bb"},
                             {RelationLabel{"r2"}, "cc"}});
  auto trie = RelationTrie::build(schema);
  auto sample = simple_sample(schema);
  Rng rng(5);
  auto params = random_params(schema, trie, sample, rng);
  DecodeConfig config;
  config.beam_size = 16;
  CHECK(pgc_decode(params, sample, trie, schema, config).size() == 3);
}

TEST_CASE("pgc matches the brute-force oracle with a wide beam") {
  Rng rng(202);
  for (int iter = 0; iter < 50; ++iter) {
    auto schema = random_schema(rng, 8);
    auto trie = RelationTrie::build(schema);
    auto sample = simple_sample(schema);
    auto params = random_params(schema, trie, sample, rng);

    DecodeConfig config;
    config.beam_size = schema.relations.size();
    auto beam = pgc_decode(params, sample, trie, schema, config);
    auto oracle = brute_force_decode(params, sample, trie, schema,
                                     config.beam_size, config.alpha);
    REQUIRE(beam.size() == oracle.size());
    for (std::size_t i = 0; i < beam.size(); ++i) {
      CHECK(beam[i].tokens == oracle[i].tokens);
      CHECK(beam[i].f == doctest::Approx(oracle[i].f).epsilon(1e-12));
    }
  }
}

TEST_CASE("narrow beams only ever take admissible tokens") {
  Rng rng(303);
  for (int iter = 0; iter < 50; ++iter) {
    auto schema = random_schema(rng, 8);
    auto trie = RelationTrie::build(schema);
    auto sample = simple_sample(schema);
    auto params = random_params(schema, trie, sample, rng);

    DecodeConfig config;
    config.beam_size = 1 + rng.uniform(3);
    auto candidates = pgc_decode(params, sample, trie, schema, config);
    REQUIRE(!candidates.empty());
    auto oracle = brute_force_decode(params, sample, trie, schema, 1, config.alpha);
    // Beam search is approximate: its best cannot beat the exact best.
    CHECK(candidates.front().sum_logprob() <= oracle.front().sum_logprob() + 1e-12);
    for (const auto& cand : candidates) {
      TokenList path;
      for (const Token& tok : cand.tokens) {
        CHECK(trie.allowed_next(path).contains(tok));
        path.push_back(tok);
      }
    }
  }
}

TEST_CASE("uniform model ties break by token order") {
  auto schema = make_schema({"r0", "r1"}, {{RelationLabel{"r0"}, "zz"},
                                           {RelationLabel{"r1"}, "aa"}});
  auto trie = RelationTrie::build(schema);
  auto sample = simple_sample(schema);
  auto params = init_params(schema, trie, {sample});  // all-zero weights
  auto candidates = brute_force_decode(params, sample, trie, schema, 2, 0.6);
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0].tokens == TokenList{"aa", "<E>"});
  auto beam = pgc_decode(params, sample, trie, schema, DecodeConfig{});
  CHECK(beam[0].tokens == TokenList{"aa", "<E>"});
}

TEST_CASE("single-relation schema decodes to that relation") {
  auto schema = make_schema({"no_relation"});
  auto trie = RelationTrie::build(schema);
  auto sample = simple_sample(schema);
  Rng rng(9);
  auto params = random_params(schema, trie, sample, rng);
  for (std::size_t k : {1u, 4u, 16u}) {
    auto out = brute_force_decode(params, sample, trie, schema, k, 0.6);
    REQUIRE(out.size() == 1);
    CHECK(out[0].tokens == TokenList{"no", "relation", "<E>"});
  }
}

TEST_CASE("decoded candidates always spell schema relations") {
  Rng rng(404);
  for (int iter = 0; iter < 200; ++iter) {
    auto schema = random_schema(rng, 10);
    auto trie = RelationTrie::build(schema);
    auto sample = simple_sample(schema);
    auto params = random_params(schema, trie, sample, rng, 1.0);
    DecodeConfig config;
    config.beam_size = 1 + rng.uniform(16);
    for (const auto& cand : pgc_decode(params, sample, trie, schema, config)) {
      int node = trie.walk(cand.tokens);
      REQUIRE(node >= 0);
      REQUIRE(trie.nodes()[static_cast<std::size_t>(node)].terminal);
      REQUIRE(schema.contains(cand.label));
    }
  }
}

namespace {

CandidateRelation with_f(double f, TokenList tokens = {"x", "<E>"}) {
  CandidateRelation c;
  c.f = f;
  c.tokens = std::move(tokens);
  c.label = RelationLabel{"x"};
  return c;
}

}  // namespace

TEST_CASE("select under the default convention") {
  DecodeConfig config;  // lambda = 1.0, likelihood_consistent
  std::vector<CandidateRelation> candidates{with_f(0.4), with_f(0.9, {"y", "<E>"}),
                                            with_f(1.5, {"z", "<E>"})};
  auto out = select(candidates, config);
  REQUIRE(out.size() == 2);
  CHECK(out[0].f == 0.4);
  CHECK(out[1].f == 0.9);
  for (const auto& c : out) CHECK(c.established);
}

TEST_CASE("select falls back to the best candidate") {
  DecodeConfig config;
  std::vector<CandidateRelation> candidates{with_f(1.4), with_f(2.0, {"y", "<E>"})};
  auto out = select(candidates, config);
  REQUIRE(out.size() == 1);
  CHECK(out[0].f == 1.4);
  CHECK(out[0].established);
}

TEST_CASE("select removes no-relation when a real relation is established") {
  DecodeConfig config;
  CandidateRelation none;
  none.f = 0.3;
  none.tokens = {"no", "relation", "<E>"};
  none.label = RelationLabel{"no_relation"};
  auto out = select({none, with_f(0.5)}, config);
  REQUIRE(out.size() == 1);
  CHECK(out[0].tokens == TokenList{"x", "<E>"});

  // Alone it survives.
  out = select({none}, config);
  REQUIRE(out.size() == 1);
  CHECK(out[0].tokens == TokenList{"no", "relation", "<E>"});
}

TEST_CASE("select under paper_literal keeps f > lambda") {
  DecodeConfig config;
  config.convention = Convention::paper_literal;
  auto out = select({with_f(0.4), with_f(1.5, {"y", "<E>"})}, config);
  REQUIRE(out.size() == 1);
  CHECK(out[0].f == 1.5);
}

TEST_CASE("select monotonicity under the default convention") {
  Rng rng(606);
  DecodeConfig config;
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<CandidateRelation> candidates;
    for (int i = 0; i < 5; ++i) {
      candidates.push_back(
          with_f(2.0 * rng.uniform_real(), {"t" + std::to_string(i), "<E>"}));
    }
    auto out = select(candidates, config);
    double worst = 0.0;
    for (const auto& c : out) worst = std::max(worst, c.f);
    if (out.size() > 1 || worst < config.lambda) {
      for (const auto& c : candidates) {
        if (c.f <= worst) {
          bool found = false;
          for (const auto& e : out) found = found || e.tokens == c.tokens;
          CHECK(found);
        }
      }
    }
  }
}

TEST_CASE("select rejects an empty candidate list") {
  CHECK_THROWS_AS(select({}, DecodeConfig{}), ConstraintError);
}
