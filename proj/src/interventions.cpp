#include "itvreg/interventions.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>

namespace itvreg {

Sentence mask_single(const Sentence& sentence, std::size_t j) {
  if (sentence.size() < 2) throw Error("mask_single needs a sentence of length >= 2");
  if (j >= sentence.size())
    throw Error("mask position " + std::to_string(j) + " out of range for length " + std::to_string(sentence.size()));
  Sentence out;
  out.reserve(sentence.size() - 1);
  for (std::size_t i = 0; i < sentence.size(); ++i)
    if (i != j) out.push_back(sentence[i]);
  return out;
}

std::size_t mask_count(std::size_t length, double fraction) {
  if (length < 2) throw Error("masking needs a sentence of length >= 2");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error("mask fraction must lie in (0,1], got " + std::to_string(fraction));
  auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length) + 0.5));
  return std::clamp<std::size_t>(k, 1, length - 1);
}

Sentence mask_fraction(const Sentence& sentence, double fraction, std::uint64_t seed) {
  const auto k = mask_count(sentence.size(), fraction);
  std::vector<std::size_t> idx(sentence.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots hold the removed positions.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<bool> drop(sentence.size(), false);
  for (std::size_t i = 0; i < k; ++i) drop[idx[i]] = true;
  Sentence out;
  out.reserve(sentence.size() - k);
  for (std::size_t i = 0; i < sentence.size(); ++i)
    if (!drop[i]) out.push_back(sentence[i]);
  return out;
}

Sentence apply_intervention(const Sentence& sentence, const InterventionSpec& spec) {
  switch (spec.kind) {
    case InterventionKind::MaskSingle:
      return mask_single(sentence, spec.position);
    case InterventionKind::MaskFraction:
      return mask_fraction(sentence, spec.fraction, spec.seed);
  }
  throw Error("unknown intervention kind");
}

namespace {

void put(std::ostream& os, const std::optional<double>& v) {
  if (v)
    os << std::setprecision(9) << *v;
  else
    os << "error";
}

}  // namespace

void write_importance_tsv(std::ostream& os, const ImportanceReport& report, const Vocab& vocab) {
  os << "position\ttoken\ts_theta\ts_theta0\tamplification\n";
  for (std::size_t j = 0; j < report.sentence.size(); ++j) {
    os << j << '\t' << vocab.token(report.sentence[j]) << '\t';
    put(os, report.s_theta[j]);
    os << '\t';
    put(os, report.s_theta0[j]);
    os << '\t';
    put(os, report.amplification[j]);
    os << '\n';
  }
}

std::vector<TokenAmplification> summarize_amplification(const std::vector<ImportanceReport>& reports) {
  std::map<TokenId, TokenAmplification> acc;
  for (const auto& r : reports)
    for (std::size_t j = 0; j < r.sentence.size(); ++j) {
      if (!r.amplification[j]) continue;
      auto& a = acc[r.sentence[j]];
      a.token = r.sentence[j];
      a.max_amplification = a.occurrences == 0 ? *r.amplification[j] : std::max(a.max_amplification, *r.amplification[j]);
      ++a.occurrences;
    }
  std::vector<TokenAmplification> out;
  for (auto& [t, a] : acc) out.push_back(a);
  return out;
}

void write_amplification_summary_tsv(std::ostream& os, const std::vector<TokenAmplification>& summary,
                                     const Vocab& vocab) {
  os << "token_id\ttoken\tmax_amplification\toccurrences\n";
  for (const auto& a : summary)
    os << a.token << '\t' << vocab.token(a.token) << '\t' << std::setprecision(9) << a.max_amplification << '\t'
       << a.occurrences << '\n';
}

}  // namespace itvreg
