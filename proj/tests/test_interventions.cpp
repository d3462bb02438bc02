#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "itvreg/interventions.hpp"

using namespace itvreg;
using testutil::model_from_rows;

TEST_CASE("mask_single") {
  CHECK(mask_single({1, 2, 3}, 1) == Sentence{1, 3});
  CHECK(mask_single({1, 2}, 0) == Sentence{2});
  CHECK_THROWS_AS(mask_single({1}, 0), Error);
  CHECK_THROWS_AS(mask_single({1, 2}, 2), Error);
}

TEST_CASE("mask_fraction counting rule") {
  Sentence ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(mask_fraction(ten, 0.5, 1).size() == 5);
  CHECK(mask_fraction(ten, 0.15, 1).size() == 8);
  CHECK(mask_fraction({1, 2}, 0.9, 1).size() == 1);
  CHECK(mask_count(10, 0.15) == 2);
  CHECK(mask_count(3, 0.1) == 1);
  CHECK_THROWS_AS(mask_fraction({1}, 0.5, 0), Error);
  CHECK_THROWS_AS(mask_fraction(ten, 0.0, 0), Error);
}

TEST_CASE("mask_fraction keeps an ordered subsequence and is seeded") {
  Sentence s{10, 20, 30, 40, 50, 60, 70, 80};
  std::set<Sentence> outcomes;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto out = mask_fraction(s, 0.5, seed);
    CHECK(std::is_sorted(out.begin(), out.end()));
    CHECK(std::includes(s.begin(), s.end(), out.begin(), out.end()));
    CHECK(out == mask_fraction(s, 0.5, seed));
    outcomes.insert(out);
  }
  CHECK(outcomes.size() > 10);
}

TEST_CASE("apply_intervention dispatches") {
  InterventionSpec spec;
  spec.kind = InterventionKind::MaskSingle;
  spec.position = 2;
  CHECK(apply_intervention({1, 2, 3}, spec) == Sentence{1, 2});
  spec.kind = InterventionKind::MaskFraction;
  spec.fraction = 0.5;
  spec.seed = 4;
  CHECK(apply_intervention({1, 2, 3, 4}, spec) == mask_fraction({1, 2, 3, 4}, 0.5, 4));
}

TEST_CASE("importance_scores examples") {
  const auto m = model_from_rows({{1, 0}, {0, 1}});
  const auto r = importance_scores(m, {1, 2});
  REQUIRE(r.scores[0]);
  CHECK(*r.scores[0] == doctest::Approx(0.29289).epsilon(1e-5));
  CHECK(*r.scores[1] == doctest::Approx(1 - 1 / std::sqrt(2.0)).epsilon(1e-12));

  const auto rep = importance_scores(m, {1, 1, 2});
  CHECK(*rep.scores[0] == doctest::Approx(*rep.scores[1]).epsilon(1e-15));

  for (const auto& s : importance_scores(m, {2, 2, 2, 2}).scores) CHECK(*s == doctest::Approx(0.0));
  CHECK_THROWS_AS(importance_scores(m, {1}), Error);
}

TEST_CASE("importance scores of a degenerate masked view carry an error") {
  const auto m = model_from_rows({{1, 0}, {-1, 0}, {0, 1}});
  const auto r = importance_scores(m, {1, 2, 3});
  CHECK_FALSE(r.scores[2]);
  CHECK(!r.errors[2].empty());
  CHECK(r.scores[0]);
}

TEST_CASE("importance scores stay in [0, 2]") {
  const auto vocab = testutil::toy_vocab(10);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = testutil::random_model(vocab, 3, trial);
    const auto s = testutil::random_sentence(rng, 10, 2, 6);
    for (const auto& v : importance_scores(m, s).scores)
      if (v) CHECK((*v >= 0.0 && *v <= 2.0));
  }
}

TEST_CASE("importance_report and amplification") {
  const auto theta0 = model_from_rows({{1, 0}, {0, 1}, {0.6, 0.8}});
  SUBCASE("identical models give ratio 1") {
    const auto r = importance_report(theta0, theta0, {1, 2, 3});
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(*r.amplification[j] == 1.0);
      CHECK(*r.s_theta[j] == *r.s_theta0[j]);
    }
  }
  SUBCASE("scaling one row raises its importance") {
    auto theta = theta0;
    theta.table.row(2) *= 10;
    const Sentence x{1, 2, 3};
    const auto r = importance_report(theta, theta0, x);
    const auto full = encode(theta, x).embedding;
    const double direct = 1 - full.dot(encode(theta, Sentence{1, 3}).embedding);
    CHECK(*r.s_theta[1] == doctest::Approx(direct).epsilon(1e-12));
    CHECK(*r.s_theta[1] > *r.s_theta0[1]);
    CHECK(*r.amplification[1] > 1.0);
  }
  SUBCASE("amplification_ratio floor") {
    CHECK(amplification_ratio(0.0, 0.0) == 1.0);
    CHECK(amplification_ratio(0.5, 0.0) == doctest::Approx(0.5 / 1e-6));
    CHECK(amplification_ratio(0.2, 0.1) == doctest::Approx(2.0));
  }
}

TEST_CASE("mean_amplification and report writers") {
  const auto theta0 = model_from_rows({{1, 0}, {0, 1}, {0.6, 0.8}});
  auto theta = theta0;
  theta.table.row(1) *= 4;
  std::map<std::string, Sentence> sentences{{"a", {1, 2}}, {"b", {1, 3}}, {"c", {2}}};
  const auto amp = mean_amplification(theta, theta0, sentences, {1});
  REQUIRE(amp);
  const auto ra = importance_report(theta, theta0, {1, 2});
  const auto rb = importance_report(theta, theta0, {1, 3});
  CHECK(*amp == doctest::Approx((*ra.amplification[0] + *rb.amplification[0]) / 2).epsilon(1e-12));
  CHECK_FALSE(mean_amplification(theta, theta0, sentences, {7}));

  std::ostringstream tsv;
  write_importance_tsv(tsv, ra, *theta.vocab);
  CHECK(tsv.str().find("t1") != std::string::npos);

  const auto summary = summarize_amplification({ra, rb});
  std::ostringstream sum;
  write_amplification_summary_tsv(sum, summary, *theta.vocab);
  CHECK(!sum.str().empty());
}
