#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"

using namespace itvreg;
using testutil::model_from_rows;

TEST_CASE("encode examples") {
  const auto m = model_from_rows({{1, 0}, {0, 1}, {-1, 0}});
  const auto e1 = encode(m, {1}).embedding;
  CHECK(e1(0) == doctest::Approx(1.0));
  CHECK(e1(1) == doctest::Approx(0.0));

  const auto e12 = encode(m, {1, 2}).embedding;
  CHECK(e12(0) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(e12(1) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(encode(m, {1, 3}), DegenerateNormError);
  CHECK_THROWS_AS(encode(m, {}), Error);
  CHECK_THROWS_AS(encode(m, {9}), Error);
}

TEST_CASE("UNK row is zero so UNK-only sentences are degenerate") {
  const auto m = model_from_rows({{1, 0}});
  CHECK_THROWS_AS(encode(m, {Vocab::kUnk}), DegenerateNormError);
  const auto e = encode(m, {Vocab::kUnk, 1}).embedding;
  CHECK(e(0) == doctest::Approx(1.0));
}

TEST_CASE("encode_with_dropout") {
  const auto vocab = testutil::toy_vocab(6);
  const auto m = testutil::random_model(vocab, 8, 3);
  const Sentence s{1, 2, 3, 4, 5};

  const auto plain = encode(m, s).embedding;
  CHECK((encode_with_dropout(m, s, 0.0, 99).embedding - plain).norm() == 0.0);

  std::set<std::vector<double>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = encode_with_dropout(m, s, 0.5, seed).embedding;
    CHECK(e.norm() == doctest::Approx(1.0));
    seen.insert(std::vector<double>(e.data(), e.data() + e.size()));
  }
  CHECK(seen.size() > 90);

  const auto a = encode_with_dropout(m, s, 0.5, 5).embedding;
  const auto b = encode_with_dropout(m, s, 0.5, 5).embedding;
  CHECK((a - b).norm() == 0.0);

  CHECK_THROWS_AS(encode_with_dropout(m, s, 1.0, 0), Error);
  CHECK_THROWS_AS(encode_with_dropout(m, s, -0.1, 0), Error);
}

TEST_CASE("relevance examples") {
  const auto m = model_from_rows({{1, 0}, {0, 1}});
  CHECK(relevance(m, {1, 2}, {1, 2}) == doctest::Approx(1.0));
  CHECK(relevance(m, {1}, {2}) == doctest::Approx(0.0));
  CHECK(relevance(m, {1, 2}, {1}) == doctest::Approx(0.70711).epsilon(1e-5));
}

TEST_CASE("encode_backward examples") {
  SUBCASE("upstream parallel to the embedding gives zero") {
    const auto m = model_from_rows({{3, 4}, {1, -2}});
    const auto e = encode(m, {1, 2}).embedding;
    const auto g = encode_backward(m, {1, 2}, Vec<double>(2.5 * e));
    for (const auto& [t, v] : g) CHECK(v.norm() < 1e-15);
  }
  SUBCASE("unit single token, orthogonal upstream passes through") {
    const auto m = model_from_rows({{0.6, 0.8}});
    Vec<double> u(2);
    u << -0.8 * 3, 0.6 * 3;
    const auto g = encode_backward(m, {1}, u);
    REQUIRE(g.size() == 1);
    CHECK((g.at(1) - u).norm() < 1e-15);
  }
  SUBCASE("repeated tokens accumulate") {
    const auto m = model_from_rows({{1, 0}, {0, 1}});
    Vec<double> u(2);
    u << 1, -1;
    const auto once = encode_backward(m, {1, 2}, u);
    const auto twice = encode_backward(m, {1, 1, 2}, u);
    CHECK(twice.size() == 2);
    CHECK(once.at(1).norm() > 0);
  }
  SUBCASE("wrong upstream size") {
    const auto m = model_from_rows({{1, 0}});
    CHECK_THROWS_AS(encode_backward(m, {1}, Vec<double>(Vec<double>::Ones(3))), Error);
  }
}

TEST_CASE("encode_backward matches finite differences") {
  const auto vocab = testutil::toy_vocab(7);
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testutil::random_model(vocab, 4, 100 + trial);
    const auto s = testutil::random_sentence(rng, 7, 1, 6);
    const Vec<double> u = Vec<double>::Random(4);
    const auto g = encode_backward(m, s, u);
    const double err = testutil::fd_rel_error(m, g, [&](const EmbeddingModel<double>& mm) {
      return encode(mm, s).embedding.dot(u);
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("encoder invariants on random sentences") {
  const auto vocab = testutil::toy_vocab(30);
  const auto m = testutil::random_model(vocab, 16, 5);
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = testutil::random_sentence(rng, 30, 1, 12);
    const auto e = encode(m, s).embedding;
    CHECK(std::abs(e.norm() - 1.0) <= 1e-6);

    auto p = s;
    std::shuffle(p.begin(), p.end(), rng);
    CHECK((encode(m, p).embedding - e).norm() < 1e-12);

    auto scaled = m;
    scaled.table *= 7.5;
    CHECK((encode(scaled, s).embedding - e).norm() < 1e-12);
  }
}

TEST_CASE("float and double encoders agree") {
  const auto vocab = testutil::toy_vocab(5);
  const auto m = testutil::random_model(vocab, 6, 1);
  const auto mf = m.cast<float>();
  const Sentence s{1, 3, 5};
  CHECK((encode(mf, s).embedding.cast<double>() - encode(m, s).embedding).norm() < 1e-6);
}

TEST_CASE("model construction") {
  const auto vocab = testutil::toy_vocab(3);
  CHECK_THROWS_AS(EmbeddingModel<double>(vocab, 1), Error);
  const auto a = EmbeddingModel<float>::uniform_init(vocab, 4, 1);
  const auto b = EmbeddingModel<float>::uniform_init(vocab, 4, 1);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.table.cwiseAbs().maxCoeff() <= 0.5f / 4);
  CHECK(a.frozen_copy().frozen);
}
