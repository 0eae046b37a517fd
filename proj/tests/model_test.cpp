#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cptuning/errors.hpp"
#include "cptuning/model.hpp"
#include "cptuning/training.hpp"
#include "test_util.hpp"

using namespace cptuning;
using cptuning::testing::random_params;
using cptuning::testing::random_schema;
using cptuning::testing::simple_instance;
using cptuning::testing::simple_sample;

namespace {

struct Fixture {
  RelationSchema schema;
  RelationTrie trie;
  FormattedSample sample;
  ModelParams params;

  explicit Fixture(std::uint64_t seed, double scale = 0.5)
      : schema(make_schema({"per:city_of_birth", "per:city_of_death", "no_relation",
                            "org:founded_by"})),
        trie(RelationTrie::build(schema)),
        sample(simple_sample(schema)),
        params([&] {
          Rng rng(seed);
          return random_params(schema, trie, sample, rng, scale);
        }()) {}
};

std::vector<TrainSample> one_sample_batch(const Fixture& fx, std::uint64_t seed) {
  TrainSample ts;
  ts.sample = fx.sample;
  ts.negatives = sample_negatives(fx.schema, simple_instance(fx.schema).gold_relations,
                                  4, seed);
  return {ts};
}

}  // namespace

TEST_CASE("zero weights give a uniform distribution") {
  Fixture fx(1, 0.0);
  auto lp = next_token_logprobs(fx.params, fx.sample, {});
  const double expected = -std::log(static_cast<double>(fx.params.tokens.size()));
  for (double v : lp) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("distributions are normalized for random weights") {
  Fixture fx(2);
  TokenList partial;
  for (const Token& t : fx.schema.relations[0].tokens) {
    auto lp = next_token_logprobs(fx.params, fx.sample, partial);
    double sum = 0.0;
    for (double v : lp) {
      CHECK(v <= 0.0);
      sum += std::exp(v);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    partial.push_back(t);
  }
}

TEST_CASE("sequence_logprob matches step-by-step composition") {
  Fixture fx(3);
  const auto& relation = fx.schema.relations[1].tokens;
  auto seq = sequence_logprob(fx.params, fx.sample, relation);
  REQUIRE(seq.size() == relation.size());
  TokenList partial;
  for (std::size_t i = 0; i < relation.size(); ++i) {
    auto lp = next_token_logprobs(fx.params, fx.sample, partial);
    CHECK(seq[i] == lp[static_cast<std::size_t>(fx.params.tokens.lookup(relation[i]))]);
    partial.push_back(relation[i]);
  }
}

TEST_CASE("sequence_logprob validates its input") {
  Fixture fx(4);
  CHECK_THROWS_AS(sequence_logprob(fx.params, fx.sample, {"person", "city"}),
                  ConstraintError);
  CHECK_THROWS_AS(sequence_logprob(fx.params, fx.sample, {"quasar", "<E>"}),
                  ConfigError);
}

TEST_CASE("determinism of the forward pass") {
  Fixture fx(5);
  auto a = next_token_logprobs(fx.params, fx.sample, {"person"});
  auto b = next_token_logprobs(fx.params, fx.sample, {"person"});
  CHECK(a == b);
}

// Central finite differences over randomly probed coordinates. Coordinates
// whose perturbation sits within 1e-6 of a hinge kink are skipped.
static void check_gradient(LossKind kind, std::uint64_t seed) {
  Fixture fx(seed);
  auto batch = one_sample_batch(fx, seed);
  LossSpec spec;
  spec.kind = kind;

  // Keep hinge arguments away from the kinks for this fixture.
  if (kind == LossKind::ctl || kind == LossKind::combined) {
    auto away_from_kinks = [&] {
      for (const auto& ts : batch) {
        std::vector<TokenList> all = ts.sample.gold_relation_tokens;
        all.insert(all.end(), ts.negatives.begin(), ts.negatives.end());
        for (const auto& rel : all) {
          auto lps = sequence_logprob(fx.params, ts.sample, rel);
          double nll = 0.0;
          for (double lp : lps) nll -= lp;
          double f = nll / std::pow(static_cast<double>(rel.size()), spec.alpha);
          if (std::abs(f - spec.lambda) < 1e-4 || std::abs(f - spec.zeta) < 1e-4) {
            return false;
          }
        }
      }
      return true;
    };
    REQUIRE(away_from_kinks());
  }

  auto grad = loss_gradient(fx.params, batch, fx.trie, spec);
  Rng rng(seed * 31 + 7);
  const double eps = 1e-5;
  double max_rel_err = 0.0;
  for (int probe = 0; probe < 120; ++probe) {
    std::size_t i = rng.uniform(fx.params.weights.size());
    ModelParams plus = fx.params;
    plus.weights[i] += eps;
    ModelParams minus = fx.params;
    minus.weights[i] -= eps;
    double numeric = (loss_value(plus, batch, fx.trie, spec) -
                      loss_value(minus, batch, fx.trie, spec)) /
                     (2.0 * eps);
    double denom = std::max(1e-6, std::abs(grad[i]) + std::abs(numeric));
    max_rel_err = std::max(max_rel_err, std::abs(grad[i] - numeric) / denom);
  }
  CHECK(max_rel_err <= 1e-4);
}

TEST_CASE("gradient check: ce") { check_gradient(LossKind::ce, 11); }
TEST_CASE("gradient check: lbls") { check_gradient(LossKind::lbls, 12); }
TEST_CASE("gradient check: ctl") { check_gradient(LossKind::ctl, 13); }
TEST_CASE("gradient check: combined") { check_gradient(LossKind::combined, 14); }

TEST_CASE("inactive hinges contribute no gradient") {
  Fixture fx(15, 0.0);  // uniform model
  auto batch = one_sample_batch(fx, 15);
  LossSpec spec;
  spec.kind = LossKind::ctl;
  // With a uniform model every f is well above lambda and zeta: the gold
  // hinge is active but the fake hinge max(zeta - f, 0) is flat.
  spec.lambda = 100.0;  // gold hinge inactive too
  auto grad = loss_gradient(fx.params, batch, fx.trie, spec);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("apply_update and shape checks") {
  Fixture fx(16);
  auto before = fx.params.weights;
  std::vector<double> zero(before.size(), 0.0);
  apply_update(fx.params, zero, 0.5);
  CHECK(fx.params.weights == before);

  std::vector<double> bad(3, 0.0);
  CHECK_THROWS_AS(apply_update(fx.params, bad, 0.5), NumericError);
}

TEST_CASE("learning-rate schedule shape") {
  const std::size_t total = 100;
  const double peak = 0.1;
  CHECK(learning_rate(10, total, peak) == doctest::Approx(peak));
  CHECK(learning_rate(total, total, peak) == 0.0);
  CHECK(learning_rate(total - 1, total, peak) <= peak / 10.0);
  CHECK(learning_rate(1, total, peak) == doctest::Approx(peak / 10.0));
  // Monotone up then down.
  for (std::size_t s = 2; s <= 10; ++s) {
    CHECK(learning_rate(s, total, peak) >= learning_rate(s - 1, total, peak));
  }
  for (std::size_t s = 12; s <= total; ++s) {
    CHECK(learning_rate(s, total, peak) <= learning_rate(s - 1, total, peak));
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Fixture fx(17);
  std::stringstream buf;
  fx.params.save(buf);
  auto loaded = ModelParams::load(buf);
  CHECK(loaded.features.items == fx.params.features.items);
  CHECK(loaded.tokens.items == fx.params.tokens.items);
  REQUIRE(loaded.weights.size() == fx.params.weights.size());
  for (std::size_t i = 0; i < loaded.weights.size(); ++i) {
    CHECK(loaded.weights[i] == fx.params.weights[i]);
  }

  std::stringstream again;
  loaded.save(again);
  CHECK(again.str() == buf.str());
}
