#pragma once

#include <algorithm>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "itvreg/corpus.hpp"
#include "itvreg/encoder.hpp"

namespace itvreg {

struct ScoredItem {
  std::string id;
  double score = 0.0;
};

struct RankingResult {
  std::string query_id;
  std::vector<ScoredItem> top;  // scores non-increasing, ties by id ascending
};

/// Orders by descending score, then ascending id.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Pre-encoded candidate items. Items whose encoding is degenerate are left
/// out and listed in `excluded`.
template <typename Scalar>
struct ItemIndex {
  std::vector<std::string> ids;
  Table<Scalar> embeddings;  // one row per id
  std::vector<std::string> excluded;

  static ItemIndex build(const EmbeddingModel<Scalar>& theta, const std::map<std::string, Sentence>& items) {
    ItemIndex idx;
    std::vector<Vec<Scalar>> rows;
    for (const auto& [id, s] : items) {
      try {
        rows.push_back(encode(theta, s).embedding);
        idx.ids.push_back(id);
      } catch (const DegenerateNormError& e) {
        idx.excluded.push_back(id + ": " + e.what());
      }
    }
    idx.embeddings.resize(static_cast<Eigen::Index>(rows.size()), theta.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) idx.embeddings.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return idx;
  }
};

/// Top-k items by f(X).f(Z).
template <typename Scalar>
RankingResult rank_items(const EmbeddingModel<Scalar>& theta, const Sentence& x, const ItemIndex<Scalar>& index,
                         std::size_t k, std::string query_id = {}) {
  if (k < 1) throw Error("rank_items needs k >= 1");
  if (index.ids.empty()) throw Error("rank_items needs a nonempty candidate set");
  if (k > index.ids.size())
    throw Error("k = " + std::to_string(k) + " exceeds the " + std::to_string(index.ids.size()) + " candidate items");
  const auto q = encode(theta, x);
  const Vec<Scalar> scores = index.embeddings * q.embedding;
  std::vector<ScoredItem> all(index.ids.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    all[i] = {index.ids[i], static_cast<double>(scores(static_cast<Eigen::Index>(i)))};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
  all.resize(k);
  return {std::move(query_id), std::move(all)};
}

template <typename Scalar>
RankingResult rank_items(const EmbeddingModel<Scalar>& theta, const Sentence& x,
                         const std::map<std::string, Sentence>& items, std::size_t k, std::string query_id = {}) {
  return rank_items(theta, x, ItemIndex<Scalar>::build(theta, items), k, std::move(query_id));
}

/// Fraction of the top-k entries that are in `relevant`.
double precision_at_k(const RankingResult& ranking, const std::set<std::string>& relevant, std::size_t k);

/// Partial ROC area over fpr in [0, fpr_max], divided by fpr_max. Tied scores
/// form one ROC step traversed by a straight segment.
double auc_partial(std::vector<std::pair<double, int>> scored, double fpr_max);

inline constexpr double kAucFprMax = 0.05;
inline constexpr int kDefaultQuantileBins = 5;
inline const std::vector<int> kDefaultKs{1, 3, 5};

struct EvalReport {
  std::string split;
  std::map<int, double> precision_at;
  std::optional<double> auc_005;
  /// P@1 of queries grouped by the frequency bin of their top-1 item.
  std::map<int, double> quantile_p1;
  std::map<int, std::size_t> quantile_queries;
  std::size_t n_queries = 0;
  std::size_t n_empty_ground_truth = 0;
  std::size_t n_candidates = 0;
  std::vector<std::string> excluded_items;
  std::string config_digest;
};

template <typename Scalar>
EvalReport evaluate(const EmbeddingModel<Scalar>& theta, const Corpus& corpus, const std::vector<int>& ks,
                    const std::map<std::string, int>* bins = nullptr, std::string split = "iid") {
  if (ks.empty()) throw Error("evaluate needs at least one k");
  if (!same_vocab(corpus.vocab, theta.vocab)) throw Error("corpus vocabulary differs from the model vocabulary");
  if (corpus.queries.empty()) throw Error("evaluation corpus has no queries");
  const int kmax = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) < 1) throw Error("every k must be >= 1");

  const auto index = ItemIndex<Scalar>::build(theta, corpus.items);
  const auto relevant = corpus.relevant_items();
  EvalReport rep;
  rep.split = std::move(split);
  rep.excluded_items = index.excluded;
  rep.n_candidates = index.ids.size();
  for (int k : ks) rep.precision_at[k] = 0.0;
  if (bins)
    for (const auto& [id, b] : *bins) {
      rep.quantile_p1[b] = 0.0;
      rep.quantile_queries[b] = 0;
    }

  for (const auto& [qid, x] : corpus.queries) {
    const auto ranking = rank_items(theta, x, index, static_cast<std::size_t>(kmax), qid);
    const auto& rel = relevant.at(qid);
    if (rel.empty()) ++rep.n_empty_ground_truth;
    for (int k : ks) rep.precision_at[k] += precision_at_k(ranking, rel, static_cast<std::size_t>(k));
    if (bins) {
      auto it = bins->find(ranking.top.front().id);
      if (it == bins->end()) throw Error("item '" + ranking.top.front().id + "' has no frequency bin");
      rep.quantile_p1[it->second] += precision_at_k(ranking, rel, 1);
      ++rep.quantile_queries[it->second];
    }
    ++rep.n_queries;
  }
  for (auto& [k, v] : rep.precision_at) v /= static_cast<double>(rep.n_queries);
  for (auto& [b, v] : rep.quantile_p1)
    if (const auto n = rep.quantile_queries.at(b)) v /= static_cast<double>(n);

  if (corpus.has_labeled_negatives()) {
    std::vector<std::pair<double, int>> scored;
    for (const auto& p : corpus.pairs) {
      try {
        scored.emplace_back(static_cast<double>(relevance(theta, corpus.queries.at(p.query), corpus.items.at(p.item))),
                            p.relevance >= 0.5 ? 1 : 0);
      } catch (const DegenerateNormError&) {
      }
    }
    const bool has_pos = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.second == 1; });
    const bool has_neg = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.second == 0; });
    if (has_pos && has_neg) rep.auc_005 = auc_partial(std::move(scored), kAucFprMax);
  }
  return rep;
}

/// bin -> 100 * (method - baseline) / baseline; nullopt where baseline is 0.
std::map<int, std::optional<double>> quantile_gain_report(const EvalReport& method, const EvalReport& baseline);

template <typename Scalar>
std::vector<std::pair<double, EvalReport>> sweep_interpolation(const EmbeddingModel<Scalar>& theta,
                                                              const Corpus& iid_eval, const Corpus& ood_pool,
                                                              const std::vector<double>& fractions,
                                                              std::uint64_t seed, const std::vector<int>& ks) {
  std::vector<std::pair<double, EvalReport>> out;
  for (double f : fractions) {
    const auto mixed = interpolate_ood(iid_eval, ood_pool, f, seed);
    out.emplace_back(f, evaluate(theta, mixed, ks, nullptr, "interp"));
  }
  return out;
}

std::string eval_report_json(const EvalReport& report);
std::string eval_csv_header(const std::vector<int>& ks);
std::string eval_csv_row(const EvalReport& report, const std::vector<int>& ks, std::string_view label = {});
void write_quantile_csv(std::ostream& os, const EvalReport& baseline, const EvalReport& method);

}  // namespace itvreg
