#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <random>

#include "itvreg/encoder.hpp"

namespace testutil {

using namespace itvreg;

/// Vocabulary {UNK, t1, ..., tn} with t_i at id i.
inline VocabPtr toy_vocab(int n) {
  std::map<std::string, std::int64_t> counts;
  for (int i = 1; i <= n; ++i) counts["t" + std::to_string(i)] = 1000 - i;
  return std::make_shared<const Vocab>(Vocab::from_counts(counts, 1));
}

/// Rows are given for ids 1..n; the UNK row is left at zero.
template <typename Scalar = double>
EmbeddingModel<Scalar> model_from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.begin()->size());
  EmbeddingModel<Scalar> m(toy_vocab(n), d);
  Eigen::Index r = 1;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m.table(r, c++) = static_cast<Scalar>(v);
    ++r;
  }
  return m;
}

inline EmbeddingModel<double> random_model(const VocabPtr& vocab, Eigen::Index d, std::uint64_t seed) {
  EmbeddingModel<double> m(vocab, d);
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.table.size(); ++i) m.table.data()[i] = g(rng);
  return m;
}

inline Sentence random_sentence(Rng& rng, int vocab_tokens, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len), tok(1, vocab_tokens);
  Sentence s(static_cast<std::size_t>(len(rng)));
  for (auto& t : s) t = tok(rng);
  return s;
}

/// Relative error between an analytic sparse gradient and central finite
/// differences of `loss` over every table entry. Both gradients near zero
/// count as agreement.
template <typename F>
double fd_rel_error(const EmbeddingModel<double>& model, const SparseGrad<double>& grad, F&& loss,
                    double h = 1e-5) {
  EmbeddingModel<double> m = model;
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(m.table.size());
  Eigen::VectorXd numeric = Eigen::VectorXd::Zero(m.table.size());
  for (const auto& [t, g] : grad)
    for (Eigen::Index c = 0; c < m.dim(); ++c) analytic(t * m.dim() + c) = g(c);
  for (Eigen::Index r = 0; r < m.table.rows(); ++r)
    for (Eigen::Index c = 0; c < m.dim(); ++c) {
      const double keep = m.table(r, c);
      m.table(r, c) = keep + h;
      const double up = loss(m);
      m.table(r, c) = keep - h;
      const double down = loss(m);
      m.table(r, c) = keep;
      numeric(r * m.dim() + c) = (up - down) / (2 * h);
    }
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-9) return 0.0;
  return (analytic - numeric).norm() / scale;
}

/// Every distinct threshold t gives the ROC point of the rule score >= t;
/// the curve is the polyline through them, integrated on [0, fpr_max].
inline double auc_oracle(const std::vector<std::pair<double, int>>& scored, double fpr_max) {
  std::vector<double> thresholds;
  for (const auto& [s, y] : scored) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double P = 0, N = 0;
  for (const auto& [s, y] : scored) (y ? P : N) += 1;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (const auto& [s, y] : scored)
      if (s >= t) (y ? tp : fp) += 1;
    pts.emplace_back(fp / N, tp / P);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auto [x0, y0] = pts[i - 1];
    auto [x1, y1] = pts[i];
    if (x0 >= fpr_max) break;
    if (x1 > fpr_max) {
      y1 = y0 + (y1 - y0) * (fpr_max - x0) / (x1 - x0);
      x1 = fpr_max;
    }
    area += (x1 - x0) * (y0 + y1) / 2;
  }
  return area / fpr_max;
}

}  // namespace testutil
