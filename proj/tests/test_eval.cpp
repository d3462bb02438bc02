#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "itvreg/eval.hpp"
#include "itvreg/synthetic.hpp"

using namespace itvreg;

namespace {

/// Ranks (id, score) pairs directly, without a model.
RankingResult rank_scores(const std::vector<std::pair<std::string, double>>& scored, std::size_t k) {
  std::vector<ScoredItem> all;
  for (const auto& [id, s] : scored) all.push_back({id, s});
  std::sort(all.begin(), all.end(), ranks_before);
  all.resize(k);
  return {"q", all};
}

}  // namespace

TEST_CASE("rank_items examples") {
  const auto m = testutil::model_from_rows({{1, 0}, {0.9, std::sqrt(1 - 0.81)}, {0.2, std::sqrt(1 - 0.04)}});
  const std::map<std::string, Sentence> items{{"i2", {2}}, {"i1", {3}}, {"i0", {2}}};
  const auto r = rank_items(m, {1}, items, 3);
  REQUIRE(r.top.size() == 3);
  CHECK(r.top[0].id == "i0");
  CHECK(r.top[1].id == "i2");
  CHECK(r.top[2].id == "i1");
  CHECK(r.top[0].score == doctest::Approx(0.9));

  CHECK(rank_items(m, {1}, std::map<std::string, Sentence>{{"only", {3}}}, 1).top[0].id == "only");
  CHECK_THROWS_AS(rank_items(m, {1}, items, 4), Error);
  CHECK_THROWS_AS(rank_items(m, {1}, items, 0), Error);
}

TEST_CASE("precision_at_k examples") {
  const auto r = rank_scores({{"a", 0.9}, {"b", 0.5}, {"c", 0.4}}, 3);
  CHECK(precision_at_k(r, {"a"}, 1) == 1.0);
  CHECK(precision_at_k(r, {"a", "c"}, 3) == doctest::Approx(2.0 / 3));
  CHECK(precision_at_k(r, {}, 3) == 0.0);
  CHECK_THROWS_AS(precision_at_k(r, {"a"}, 4), Error);
}

TEST_CASE("rank_items and P@k against a full-sort oracle") {
  const auto vocab = testutil::toy_vocab(15);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = testutil::random_model(vocab, 3, trial);
    std::map<std::string, Sentence> items;
    const int n_items = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int i = 0; i < n_items; ++i) items["i" + std::to_string(i)] = testutil::random_sentence(rng, 15, 1, 3);
    const auto x = testutil::random_sentence(rng, 15, 1, 4);
    std::set<std::string> rel;
    for (const auto& [id, s] : items)
      if (rng() % 3 == 0) rel.insert(id);

    std::vector<std::pair<double, std::string>> full;
    for (const auto& [id, s] : items) full.emplace_back(-relevance(m, x, s), id);
    std::sort(full.begin(), full.end());

    const auto k = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, n_items)(rng));
    const auto r = rank_items(m, x, items, k);
    int hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(r.top[i].id == full[i].second);
      hits += rel.count(full[i].second);
    }
    CHECK(precision_at_k(r, rel, k) == static_cast<double>(hits) / static_cast<double>(k));
  }
}

TEST_CASE("P@k is invariant under increasing score transforms") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<std::string, double>> a, b;
    std::set<std::string> rel;
    for (int i = 0; i < 10; ++i) {
      const double s = std::round(u(rng) * 4) / 4;
      a.emplace_back("i" + std::to_string(i), s);
      b.emplace_back("i" + std::to_string(i), 2 * s + 1);
      if (i % 3 == 0) rel.insert("i" + std::to_string(i));
    }
    for (std::size_t k : {1, 3, 5}) CHECK(precision_at_k(rank_scores(a, k), rel, k) == precision_at_k(rank_scores(b, k), rel, k));
  }
}

TEST_CASE("auc_partial examples") {
  const std::vector<std::pair<double, int>> separated{{0.9, 1}, {0.8, 1}, {0.3, 0}, {0.1, 0}};
  CHECK(auc_partial(separated, 0.05) == doctest::Approx(1.0));
  const std::vector<std::pair<double, int>> inverted{{0.9, 0}, {0.8, 0}, {0.3, 1}, {0.1, 1}};
  CHECK(auc_partial(inverted, 0.05) == doctest::Approx(0.0));
  CHECK(auc_partial(separated, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(auc_partial({{0.5, 1}}, 0.05), Error);
  CHECK_THROWS_AS(auc_partial(separated, 0.0), Error);
}

TEST_CASE("auc_partial against a threshold-sweep oracle") {
  Rng rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 60)(rng);
    const bool ties = trial % 2 == 0;
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < n; ++i) {
      const double s = ties ? std::floor(u(rng) * 5) : u(rng);
      scored.emplace_back(s, static_cast<int>(rng() % 2));
    }
    scored[0].second = 1;
    scored[1].second = 0;
    for (double fmax : {0.05, 0.3, 1.0}) CHECK(std::abs(auc_partial(scored, fmax) - testutil::auc_oracle(scored, fmax)) <= 1e-9);
  }

  std::vector<std::pair<double, int>> big;
  for (int i = 0; i < 10000; ++i) big.emplace_back(u(rng), static_cast<int>(rng() % 2));
  CHECK(std::abs(auc_partial(big, 0.05) - testutil::auc_oracle(big, 0.05)) <= 1e-9);
}

TEST_CASE("evaluate: quantile P@1 weighted by mass equals overall P@1") {
  SynthSpec spec;
  spec.n_brands = 6;
  spec.n_categories = 3;
  spec.queries_per_brand = 6;
  spec.seed = 2;
  const auto s = synth_generate(spec);
  const auto& corpus = s.split.ood_eval;
  const auto bins = item_frequency_quantiles(s.split.train, 5);
  std::map<std::string, int> all_bins = bins;
  for (const auto& [id, x] : corpus.items) all_bins.emplace(id, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = EmbeddingModel<double>::uniform_init(corpus.vocab, 6, seed);
    const auto rep = evaluate(m, corpus, {1, 3, 5}, &all_bins, "ood");
    double mass = 0.0;
    std::size_t n = 0;
    for (const auto& [b, p] : rep.quantile_p1) {
      mass += p * static_cast<double>(rep.quantile_queries.at(b));
      n += rep.quantile_queries.at(b);
    }
    CHECK(n == rep.n_queries);
    CHECK(std::abs(mass / static_cast<double>(n) - rep.precision_at.at(1)) <= 1e-12);
    CHECK_FALSE(rep.auc_005);
  }
}

TEST_CASE("evaluate on a hand-set fixture") {
  auto m = testutil::model_from_rows({{1, 0}, {0, 1}, {0.8, 0.6}, {0.6, -0.8}});
  Corpus c;
  c.vocab = m.vocab;
  c.queries = {{"qa", {1}}, {"qb", {2}}, {"qc", {4}}};
  c.items = {{"ia", {3}}, {"ib", {2}}, {"ic", {1}}};
  c.pairs = {{"qa", "ia", 1.0}, {"qb", "ib", 1.0}, {"qc", "ia", 1.0}, {"qc", "ib", 0.0}};
  // qa scores ia .8, ic 1 -> top ic (miss); qb top ib (hit); qc: ia 0, ic .6 -> top ic (miss).
  const auto rep = evaluate(m, c, {1, 2});
  CHECK(rep.precision_at.at(1) == doctest::Approx(1.0 / 3));
  CHECK(rep.precision_at.at(2) == doctest::Approx((0.5 + 0.5 + 0.5) / 3));
  CHECK(rep.n_candidates == 3);
  CHECK(rep.auc_005.has_value());

  const auto json = eval_report_json(rep);
  CHECK(json.find("\"precision_at\"") != std::string::npos);
  CHECK(eval_csv_header({1, 2}).find("p_at_2") != std::string::npos);
  CHECK(!eval_csv_row(rep, {1, 2}, "x").empty());
}

TEST_CASE("quantile_gain_report") {
  EvalReport base, method;
  base.quantile_p1 = {{0, 0.4}, {1, 0.0}, {2, 0.5}};
  method.quantile_p1 = {{0, 0.5}, {1, 0.2}, {2, 0.5}};
  const auto g = quantile_gain_report(method, base);
  CHECK(*g.at(0) == doctest::Approx(25.0));
  CHECK_FALSE(g.at(1));
  CHECK(*g.at(2) == 0.0);
  for (const auto& [b, v] : quantile_gain_report(base, base))
    if (v) CHECK(*v == 0.0);

  base.quantile_queries = {{0, 1}, {1, 1}, {2, 1}};
  method.quantile_queries = base.quantile_queries;
  std::ostringstream os;
  write_quantile_csv(os, base, method);
  CHECK(os.str().find("undefined") != std::string::npos);

  method.quantile_p1.erase(2);
  CHECK_THROWS_AS(quantile_gain_report(method, base), Error);
}

TEST_CASE("sweep_interpolation") {
  SynthSpec spec;
  spec.n_brands = 6;
  spec.n_categories = 3;
  spec.queries_per_brand = 6;
  spec.seed = 1;
  const auto s = synth_generate(spec);
  const auto m = EmbeddingModel<double>::uniform_init(s.split.train.vocab, 6, 3);
  const auto direct = evaluate(m, s.split.iid_eval, {1});
  const auto sweep = sweep_interpolation(m, s.split.iid_eval, s.split.ood_eval, {0.0, 0.5, 1.0}, 9, {1});
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].second.precision_at.at(1) == direct.precision_at.at(1));
  CHECK(sweep[0].second.n_candidates == direct.n_candidates);
  CHECK(sweep[1].second.n_candidates > sweep[0].second.n_candidates);
  CHECK(sweep[2].second.n_candidates > sweep[1].second.n_candidates);
}
