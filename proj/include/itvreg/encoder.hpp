#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>

#include "itvreg/common.hpp"
#include "itvreg/corpus.hpp"

namespace itvreg {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Table = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gradient with respect to embedding rows, keyed by token id. std::map keeps
/// the accumulation and application order canonical.
template <typename Scalar>
using SparseGrad = std::map<TokenId, Vec<Scalar>>;

inline constexpr double kDegenerateNormEps = 1e-9;

/// V x d token embedding table. Row v is the embedding of token v.
template <typename Scalar>
struct EmbeddingModel {
  Table<Scalar> table;
  VocabPtr vocab;
  bool frozen = false;

  EmbeddingModel() = default;
  EmbeddingModel(VocabPtr v, Eigen::Index dim) : table(Table<Scalar>::Zero(static_cast<Eigen::Index>(v->size()), dim)), vocab(std::move(v)) {
    if (dim < 2) throw Error("embedding dim must be >= 2, got " + std::to_string(dim));
  }

  Eigen::Index dim() const { return table.cols(); }
  Eigen::Index vocab_size() const { return table.rows(); }

  /// Entries i.i.d. uniform in [-0.5/d, 0.5/d].
  static EmbeddingModel uniform_init(VocabPtr v, Eigen::Index dim, std::uint64_t seed) {
    EmbeddingModel m(std::move(v), dim);
    Rng rng(seed);
    const double half = 0.5 / static_cast<double>(dim);
    std::uniform_real_distribution<double> u(-half, half);
    for (Eigen::Index r = 0; r < m.table.rows(); ++r)
      for (Eigen::Index c = 0; c < m.table.cols(); ++c) m.table(r, c) = static_cast<Scalar>(u(rng));
    return m;
  }

  template <typename Other>
  EmbeddingModel<Other> cast() const {
    EmbeddingModel<Other> m;
    m.table = table.template cast<Other>();
    m.vocab = vocab;
    m.frozen = frozen;
    return m;
  }

  EmbeddingModel frozen_copy() const {
    EmbeddingModel m = *this;
    m.frozen = true;
    return m;
  }

  EmbeddingModel trainable_copy() const {
    EmbeddingModel m = *this;
    m.frozen = false;
    return m;
  }

  std::uint64_t checksum() const {
    return fnv1a(table.data(), static_cast<std::size_t>(table.size()) * sizeof(Scalar));
  }
};

template <typename Scalar>
struct EncodeResult {
  Vec<Scalar> embedding;  // unit norm
  Vec<Scalar> sum;        // pre-normalization sum
  Scalar norm{};
  Sentence tokens;
  /// Per-position coordinate multipliers when dropout was applied; empty otherwise.
  Table<Scalar> keep;
};

template <typename Scalar>
void check_shared_vocab(const EmbeddingModel<Scalar>& a, const EmbeddingModel<Scalar>& b) {
  if (!same_vocab(a.vocab, b.vocab) || a.vocab_size() != b.vocab_size())
    throw Error("models do not share one vocabulary (" + std::to_string(a.vocab_size()) + " vs " +
                std::to_string(b.vocab_size()) + " rows)");
  if (a.dim() != b.dim()) throw Error("models differ in embedding dim");
}

namespace detail {

template <typename Scalar>
void check_sentence(const EmbeddingModel<Scalar>& model, const Sentence& s) {
  if (s.empty()) throw Error("cannot encode an empty sentence");
  for (TokenId t : s)
    if (t < 0 || t >= model.vocab_size())
      throw Error("token id " + std::to_string(t) + " outside embedding table of " +
                  std::to_string(model.vocab_size()) + " rows");
}

template <typename Scalar>
void normalize_into(EncodeResult<Scalar>& r) {
  r.norm = r.sum.norm();
  if (!(static_cast<double>(r.norm) > kDegenerateNormEps))
    throw DegenerateNormError("degenerate sentence embedding: norm of token sum is " +
                              std::to_string(static_cast<double>(r.norm)));
  r.embedding = r.sum / r.norm;
}

}  // namespace detail

/// Normalized sum of the sentence's token embeddings.
template <typename Scalar>
EncodeResult<Scalar> encode(const EmbeddingModel<Scalar>& model, const Sentence& sentence) {
  detail::check_sentence(model, sentence);
  EncodeResult<Scalar> r;
  r.tokens = sentence;
  r.sum = Vec<Scalar>::Zero(model.dim());
  for (TokenId t : sentence) r.sum += model.table.row(t).transpose();
  detail::normalize_into(r);
  return r;
}

/// Inverted dropout on every token-embedding coordinate before the sum.
/// rate == 0 is exactly encode().
template <typename Scalar>
EncodeResult<Scalar> encode_with_dropout(const EmbeddingModel<Scalar>& model, const Sentence& sentence,
                                         double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must lie in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return encode(model, sentence);
  detail::check_sentence(model, sentence);
  EncodeResult<Scalar> r;
  r.tokens = sentence;
  r.keep = Table<Scalar>::Zero(static_cast<Eigen::Index>(sentence.size()), model.dim());
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < r.keep.rows(); ++i)
    for (Eigen::Index j = 0; j < r.keep.cols(); ++j) r.keep(i, j) = u(rng) < rate ? Scalar(0) : scale;
  r.sum = Vec<Scalar>::Zero(model.dim());
  for (Eigen::Index i = 0; i < r.keep.rows(); ++i)
    r.sum += model.table.row(sentence[static_cast<std::size_t>(i)]).cwiseProduct(r.keep.row(i)).transpose();
  detail::normalize_into(r);
  return r;
}

/// Cosine similarity of the two sentence embeddings.
template <typename Scalar>
Scalar relevance(const EmbeddingModel<Scalar>& model, const Sentence& x, const Sentence& z) {
  return encode(model, x).embedding.dot(encode(model, z).embedding);
}

/// Adds d(embedding . upstream)/d(table rows) into `grad`. The Jacobian of the
/// normalization is (I - e e^T) / |sum|, applied once per token occurrence.
template <typename Scalar, typename Derived>
void accumulate_backward(const EncodeResult<Scalar>& enc, const Eigen::MatrixBase<Derived>& upstream,
                         SparseGrad<Scalar>& grad) {
  const Vec<Scalar> g = (upstream - enc.embedding * enc.embedding.dot(upstream)) / enc.norm;
  for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
    auto [it, fresh] = grad.try_emplace(enc.tokens[i], Vec<Scalar>::Zero(g.size()));
    if (enc.keep.rows() > 0)
      it->second += g.cwiseProduct(enc.keep.row(static_cast<Eigen::Index>(i)).transpose());
    else
      it->second += g;
  }
}

template <typename Scalar>
SparseGrad<Scalar> encode_backward(const EmbeddingModel<Scalar>& model, const Sentence& sentence,
                                   const Vec<Scalar>& upstream) {
  if (upstream.size() != model.dim()) throw Error("upstream gradient has wrong dimension");
  SparseGrad<Scalar> grad;
  accumulate_backward(encode(model, sentence), upstream, grad);
  return grad;
}

template <typename Scalar>
void add_scaled(SparseGrad<Scalar>& into, const SparseGrad<Scalar>& from, Scalar scale) {
  for (const auto& [t, g] : from) {
    auto [it, fresh] = into.try_emplace(t, Vec<Scalar>::Zero(g.size()));
    it->second += scale * g;
  }
}

}  // namespace itvreg
