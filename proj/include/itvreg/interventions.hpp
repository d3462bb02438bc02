#pragma once

#include <algorithm>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "itvreg/encoder.hpp"

namespace itvreg {

enum class InterventionKind { MaskFraction, MaskSingle };

struct InterventionSpec {
  InterventionKind kind = InterventionKind::MaskFraction;
  double fraction = 0.5;
  std::size_t position = 0;
  std::uint64_t seed = 0;
};

/// Deletes position j. Masked tokens contribute nothing to the bag.
Sentence mask_single(const Sentence& sentence, std::size_t j);

/// Number of positions mask_fraction removes: round-half-up of
/// fraction * length, clamped to [1, length - 1].
std::size_t mask_count(std::size_t length, double fraction);

/// Deletes mask_count(length, fraction) positions chosen uniformly without
/// replacement; surviving tokens keep their order.
Sentence mask_fraction(const Sentence& sentence, double fraction, std::uint64_t seed);

Sentence apply_intervention(const Sentence& sentence, const InterventionSpec& spec);

/// Per-position importance; a position whose masked variant cannot be encoded
/// carries no score and an error message instead.
template <typename Scalar>
struct ImportanceScores {
  std::vector<std::optional<Scalar>> scores;
  std::vector<std::string> errors;
};

/// s_j = 1 - f(X) . f(X without position j), clamped to [0, 2].
template <typename Scalar>
ImportanceScores<Scalar> importance_scores(const EmbeddingModel<Scalar>& model, const Sentence& sentence) {
  if (sentence.size() < 2) throw Error("importance scores need a sentence of length >= 2");
  const auto full = encode(model, sentence);
  ImportanceScores<Scalar> out;
  out.scores.resize(sentence.size());
  out.errors.resize(sentence.size());
  for (std::size_t j = 0; j < sentence.size(); ++j) {
    try {
      const auto masked = encode(model, mask_single(sentence, j));
      const Scalar s = Scalar(1) - full.embedding.dot(masked.embedding);
      out.scores[j] = std::clamp(s, Scalar(0), Scalar(2));
    } catch (const Error& e) {
      out.errors[j] = e.what();
    }
  }
  return out;
}

inline constexpr double kAmplificationFloor = 1e-6;

/// s / max(s0, 1e-6); 1 when both scores sit at or below the floor.
inline double amplification_ratio(double s, double s0) {
  if (s <= kAmplificationFloor && s0 <= kAmplificationFloor) return 1.0;
  return s / std::max(s0, kAmplificationFloor);
}

struct ImportanceReport {
  Sentence sentence;
  std::vector<std::optional<double>> s_theta;
  std::vector<std::optional<double>> s_theta0;
  std::vector<std::optional<double>> amplification;
};

template <typename Scalar>
ImportanceReport importance_report(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                                   const Sentence& sentence) {
  check_shared_vocab(theta, theta0);
  const auto a = importance_scores(theta, sentence);
  const auto b = importance_scores(theta0, sentence);
  ImportanceReport r;
  r.sentence = sentence;
  for (std::size_t j = 0; j < sentence.size(); ++j) {
    std::optional<double> s, s0, amp;
    if (a.scores[j]) s = static_cast<double>(*a.scores[j]);
    if (b.scores[j]) s0 = static_cast<double>(*b.scores[j]);
    if (s && s0) amp = amplification_ratio(*s, *s0);
    r.s_theta.push_back(s);
    r.s_theta0.push_back(s0);
    r.amplification.push_back(amp);
  }
  return r;
}

/// Mean amplification over every occurrence of `tokens` in the corpus queries;
/// nullopt when no occurrence has a score.
template <typename Scalar>
std::optional<double> mean_amplification(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                                         const std::map<std::string, Sentence>& sentences,
                                         const std::set<TokenId>& tokens) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [id, s] : sentences) {
    if (s.size() < 2) continue;
    const auto r = importance_report(theta, theta0, s);
    for (std::size_t j = 0; j < s.size(); ++j)
      if (tokens.count(s[j]) && r.amplification[j]) {
        sum += *r.amplification[j];
        ++n;
      }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// TSV: position, token, s_theta, s_theta0, amplification. Missing values are
/// written as "error".
void write_importance_tsv(std::ostream& os, const ImportanceReport& report, const Vocab& vocab);

/// Max amplification seen for every token id across reports.
struct TokenAmplification {
  TokenId token = 0;
  double max_amplification = 0.0;
  std::size_t occurrences = 0;
};
std::vector<TokenAmplification> summarize_amplification(const std::vector<ImportanceReport>& reports);
void write_amplification_summary_tsv(std::ostream& os, const std::vector<TokenAmplification>& summary,
                                     const Vocab& vocab);

}  // namespace itvreg
