#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "itvreg/encoder.hpp"
#include "itvreg/interventions.hpp"

namespace itvreg {

enum class RegKind { None, OutReg, ItvReg, ItvAug, MaskReg, SimCse };

std::string to_string(RegKind kind);
RegKind parse_reg_kind(std::string_view name);

inline constexpr double kDefaultLambda = 0.1;
inline constexpr double kMaskRegFraction = 0.15;
inline constexpr double kItvRegFraction = 0.50;
inline constexpr double kDefaultDropout = 0.1;

struct RegularizerConfig {
  RegKind kind = RegKind::None;
  double lambda = kDefaultLambda;
  /// Unset means the per-method default: 0.15 for MaskReg, 0.5 otherwise.
  std::optional<double> mask_fraction;
  double dropout_rate = kDefaultDropout;
  /// Share of training queries that receive an ItvAug pair.
  double itvaug_fraction = 1.0;
  /// Fresh interventions per sentence per batch appearance.
  int interventions_per_example = 1;

  double effective_mask_fraction() const {
    return mask_fraction.value_or(kind == RegKind::MaskReg ? kMaskRegFraction : kItvRegFraction);
  }
  void validate() const;
};

template <typename Scalar>
struct LossValue {
  Scalar erm{};
  Scalar penalty{};
  Scalar total{};
  SparseGrad<Scalar> gradient;
  /// Terms dropped because an encoding was degenerate.
  std::vector<std::string> skipped;
};

template <typename Scalar>
struct AugmentedPair {
  Sentence x;
  Sentence x_prime;
  Scalar target{};  // f_base(x) . f_base(x_prime), fixed at construction
};

// ---------------------------------------------------------------------------
// Building blocks. Standalone ERM losses report erm == total; standalone
// penalties report penalty == total (unit weight).

namespace detail {

/// (f(a) . f(b) - target)^2 under one model.
template <typename Scalar>
Scalar similarity_gap(const EmbeddingModel<Scalar>& theta, const Sentence& a, const Sentence& b, Scalar target,
                      SparseGrad<Scalar>& grad, Scalar weight) {
  const auto ea = encode(theta, a);
  const auto eb = encode(theta, b);
  const Scalar c = ea.embedding.dot(eb.embedding);
  const Scalar diff = c - target;
  const Scalar dc = weight * Scalar(2) * diff;
  accumulate_backward(ea, (dc * eb.embedding).eval(), grad);
  accumulate_backward(eb, (dc * ea.embedding).eval(), grad);
  return diff * diff;
}

template <typename Scalar>
LossValue<Scalar> as_erm(Scalar v, SparseGrad<Scalar> g) {
  LossValue<Scalar> out;
  out.erm = out.total = v;
  out.gradient = std::move(g);
  return out;
}

template <typename Scalar>
LossValue<Scalar> as_penalty(Scalar v, SparseGrad<Scalar> g) {
  LossValue<Scalar> out;
  out.penalty = out.total = v;
  out.gradient = std::move(g);
  return out;
}

template <typename Scalar>
Scalar contrastive_into(const EmbeddingModel<Scalar>& theta, const Sentence& x, const Sentence& z_pos,
                        const Sentence& z_neg, SparseGrad<Scalar>& grad, Scalar weight) {
  const auto ex = encode(theta, x);
  const auto ep = encode(theta, z_pos);
  const auto en = encode(theta, z_neg);
  const Scalar v = Scalar(1) + ex.embedding.dot(en.embedding) - ex.embedding.dot(ep.embedding);
  if (!(v > Scalar(0))) return Scalar(0);  // inactive hinge; subgradient 0 at the kink
  accumulate_backward(ex, (weight * (en.embedding - ep.embedding)).eval(), grad);
  accumulate_backward(en, (weight * ex.embedding).eval(), grad);
  accumulate_backward(ep, (-weight * ex.embedding).eval(), grad);
  return v;
}

template <typename Scalar>
Scalar outreg_into(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0, const Sentence& x,
                   SparseGrad<Scalar>& grad, Scalar weight) {
  const auto e = encode(theta, x);
  const auto e0 = encode(theta0, x);
  const Vec<Scalar> diff = e.embedding - e0.embedding;
  accumulate_backward(e, (weight * Scalar(2) * diff).eval(), grad);
  return diff.squaredNorm();
}

template <typename Scalar>
Scalar base_similarity(const EmbeddingModel<Scalar>& theta0, const Sentence& x, const Sentence& x_prime) {
  return encode(theta0, x).embedding.dot(encode(theta0, x_prime).embedding);
}

template <typename Scalar>
Scalar simcse_into(const EmbeddingModel<Scalar>& theta, const Sentence& x, std::uint64_t seed_a,
                   std::uint64_t seed_b, double rate, SparseGrad<Scalar>& grad, Scalar weight) {
  const auto ea = encode_with_dropout(theta, x, rate, seed_a);
  const auto eb = encode_with_dropout(theta, x, rate, seed_b);
  const Scalar diff = ea.embedding.dot(eb.embedding) - Scalar(1);
  const Scalar dc = weight * Scalar(2) * diff;
  accumulate_backward(ea, (dc * eb.embedding).eval(), grad);
  accumulate_backward(eb, (dc * ea.embedding).eval(), grad);
  return diff * diff;
}

}  // namespace detail

/// max(0, 1 + f(X).f(Z-) - f(X).f(Z+)).
template <typename Scalar>
LossValue<Scalar> contrastive_loss(const EmbeddingModel<Scalar>& theta, const Sentence& x, const Sentence& z_pos,
                                   const Sentence& z_neg) {
  SparseGrad<Scalar> g;
  const Scalar v = detail::contrastive_into(theta, x, z_pos, z_neg, g, Scalar(1));
  return detail::as_erm(v, std::move(g));
}

/// (f(X).f(Z) - r)^2 with r in [0,1].
template <typename Scalar>
LossValue<Scalar> mse_loss(const EmbeddingModel<Scalar>& theta, const Sentence& x, const Sentence& z, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw Error("mse target relevance must lie in [0,1], got " + std::to_string(r));
  SparseGrad<Scalar> g;
  const Scalar v = detail::similarity_gap(theta, x, z, static_cast<Scalar>(r), g, Scalar(1));
  return detail::as_erm(v, std::move(g));
}

/// |f_theta(X) - f_base(X)|^2.
template <typename Scalar>
LossValue<Scalar> outreg_penalty(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                                 const Sentence& x) {
  check_shared_vocab(theta, theta0);
  SparseGrad<Scalar> g;
  const Scalar v = detail::outreg_into(theta, theta0, x, g, Scalar(1));
  return detail::as_penalty(v, std::move(g));
}

/// (f_theta(X).f_theta(X') - f_base(X).f_base(X'))^2. Only theta receives gradient.
template <typename Scalar>
LossValue<Scalar> itvreg_penalty(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                                 const Sentence& x, const Sentence& x_prime) {
  check_shared_vocab(theta, theta0);
  const Scalar p = detail::base_similarity(theta0, x, x_prime);
  SparseGrad<Scalar> g;
  const Scalar v = detail::similarity_gap(theta, x, x_prime, p, g, Scalar(1));
  return detail::as_penalty(v, std::move(g));
}

/// (f(X).f(X') - 1)^2.
template <typename Scalar>
LossValue<Scalar> maskreg_penalty(const EmbeddingModel<Scalar>& theta, const Sentence& x, const Sentence& x_prime) {
  SparseGrad<Scalar> g;
  const Scalar v = detail::similarity_gap(theta, x, x_prime, Scalar(1), g, Scalar(1));
  return detail::as_penalty(v, std::move(g));
}

/// (f(X; dropout seed_a) . f(X; dropout seed_b) - 1)^2.
template <typename Scalar>
LossValue<Scalar> simcse_penalty(const EmbeddingModel<Scalar>& theta, const Sentence& x, std::uint64_t seed_a,
                                 std::uint64_t seed_b, double rate) {
  SparseGrad<Scalar> g;
  const Scalar v = detail::simcse_into(theta, x, seed_a, seed_b, rate, g, Scalar(1));
  return detail::as_penalty(v, std::move(g));
}

/// L2 term of an augmented pair: (f(X).f(X') - R')^2.
template <typename Scalar>
LossValue<Scalar> augmented_pair_loss(const EmbeddingModel<Scalar>& theta, const AugmentedPair<Scalar>& pair) {
  SparseGrad<Scalar> g;
  const Scalar v = detail::similarity_gap(theta, pair.x, pair.x_prime, pair.target, g, Scalar(1));
  return detail::as_penalty(v, std::move(g));
}

template <typename Scalar>
struct ItvAugSet {
  std::vector<AugmentedPair<Scalar>> pairs;
  std::vector<std::string> skipped;
};

/// One (X, masked X, base similarity) triple for a seeded `fraction` of the
/// corpus queries.
template <typename Scalar>
ItvAugSet<Scalar> build_itvaug(const Corpus& corpus, const EmbeddingModel<Scalar>& theta0, double fraction,
                               double mask_fraction_value, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("itvaug fraction must lie in [0,1]");
  std::vector<std::string> ids;
  for (const auto& [id, s] : corpus.queries) ids.push_back(id);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ids.size()) + 1e-9));
  ids.resize(std::min(n, ids.size()));
  std::sort(ids.begin(), ids.end());
  ItvAugSet<Scalar> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& x = corpus.queries.at(ids[i]);
    try {
      auto xp = mask_fraction(x, mask_fraction_value, mix_seed(seed, 0x61756775ULL, i));
      const Scalar target = detail::base_similarity(theta0, x, xp);
      out.pairs.push_back({x, std::move(xp), target});
    } catch (const Error& e) {
      out.skipped.push_back(ids[i] + ": " + e.what());
    }
  }
  return out;
}

enum class LossKind { Contrastive, Mse };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct Example {
  Sentence x;
  Sentence z;
  std::optional<Sentence> z_neg;  // required for the contrastive loss
  double relevance = 1.0;         // target for the MSE loss
};

template <typename Scalar>
struct Batch {
  LossKind loss = LossKind::Contrastive;
  std::vector<Example> examples;
  std::vector<AugmentedPair<Scalar>> augmented;  // ItvAug only
  std::uint64_t seed = 0;
};

/// Seed of the `draw`-th intervention on side `side` (0 = X, 1 = Z) of example
/// `example` in a batch.
inline std::uint64_t intervention_seed(std::uint64_t batch_seed, std::size_t example, int side, int draw) {
  return mix_seed(batch_seed, 2 * static_cast<std::uint64_t>(example) + static_cast<std::uint64_t>(side),
                  static_cast<std::uint64_t>(draw));
}

/// Mean ERM over the batch plus lambda times the mean configured penalty.
/// Penalties are taken on both the query and the positive/target item of each
/// example. Terms whose encodings are degenerate are skipped and listed.
template <typename Scalar>
LossValue<Scalar> total_loss(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                             const Batch<Scalar>& batch, const RegularizerConfig& config) {
  config.validate();
  if (batch.examples.empty()) throw Error("total_loss needs a nonempty batch");
  check_shared_vocab(theta, theta0);

  LossValue<Scalar> out;
  SparseGrad<Scalar> erm_grad, pen_grad;
  std::size_t n_erm = 0, n_pen = 0;
  Scalar erm_sum{}, pen_sum{};

  for (std::size_t i = 0; i < batch.examples.size(); ++i) {
    const auto& ex = batch.examples[i];
    try {
      SparseGrad<Scalar> g;
      Scalar v{};
      if (batch.loss == LossKind::Contrastive) {
        if (!ex.z_neg) throw Error("contrastive example " + std::to_string(i) + " has no negative");
        v = detail::contrastive_into(theta, ex.x, ex.z, *ex.z_neg, g, Scalar(1));
      } else {
        if (!(ex.relevance >= 0.0 && ex.relevance <= 1.0)) throw Error("mse target relevance outside [0,1]");
        v = detail::similarity_gap(theta, ex.x, ex.z, static_cast<Scalar>(ex.relevance), g, Scalar(1));
      }
      erm_sum += v;
      ++n_erm;
      add_scaled(erm_grad, g, Scalar(1));
    } catch (const DegenerateNormError& e) {
      out.skipped.push_back("example " + std::to_string(i) + ": " + e.what());
    }
  }

  auto penalty_term = [&](auto&& fn, const std::string& what) {
    try {
      SparseGrad<Scalar> g;
      std::optional<Scalar> v = fn(g);
      if (!v) return;
      pen_sum += *v;
      ++n_pen;
      add_scaled(pen_grad, g, Scalar(1));
    } catch (const DegenerateNormError& e) {
      out.skipped.push_back(what + ": " + e.what());
    }
  };

  const double mf = config.effective_mask_fraction();
  if (config.kind == RegKind::ItvAug) {
    for (std::size_t k = 0; k < batch.augmented.size(); ++k) {
      const auto& ap = batch.augmented[k];
      penalty_term([&](SparseGrad<Scalar>& g) -> std::optional<Scalar> {
        return detail::similarity_gap(theta, ap.x, ap.x_prime, ap.target, g, Scalar(1));
      }, "augmented pair " + std::to_string(k));
    }
  } else if (config.kind != RegKind::None) {
    for (std::size_t i = 0; i < batch.examples.size(); ++i) {
      const auto& ex = batch.examples[i];
      for (int side = 0; side < 2; ++side) {
        const Sentence& s = side == 0 ? ex.x : ex.z;
        const int draws = config.kind == RegKind::OutReg ? 1 : config.interventions_per_example;
        for (int r = 0; r < draws; ++r) {
          const auto seed = intervention_seed(batch.seed, i, side, r);
          const auto what = "example " + std::to_string(i) + " side " + std::to_string(side);
          penalty_term([&](SparseGrad<Scalar>& g) -> std::optional<Scalar> {
            switch (config.kind) {
              case RegKind::OutReg:
                return detail::outreg_into(theta, theta0, s, g, Scalar(1));
              case RegKind::ItvReg: {
                if (s.size() < 2) return std::nullopt;
                const auto xp = mask_fraction(s, mf, seed);
                const Scalar p = detail::base_similarity(theta0, s, xp);
                return detail::similarity_gap(theta, s, xp, p, g, Scalar(1));
              }
              case RegKind::MaskReg: {
                if (s.size() < 2) return std::nullopt;
                const auto xp = mask_fraction(s, mf, seed);
                return detail::similarity_gap(theta, s, xp, Scalar(1), g, Scalar(1));
              }
              case RegKind::SimCse:
                return detail::simcse_into(theta, s, mix_seed(seed, 1), mix_seed(seed, 2), config.dropout_rate, g,
                                           Scalar(1));
              default:
                return std::nullopt;
            }
          }, what);
        }
      }
    }
  }

  const auto lambda = static_cast<Scalar>(config.lambda);
  out.erm = n_erm ? erm_sum / static_cast<Scalar>(n_erm) : Scalar(0);
  out.penalty = n_pen ? pen_sum / static_cast<Scalar>(n_pen) : Scalar(0);
  out.total = out.erm + lambda * out.penalty;
  if (n_erm) add_scaled(out.gradient, erm_grad, Scalar(1) / static_cast<Scalar>(n_erm));
  if (n_pen && lambda != Scalar(0)) add_scaled(out.gradient, pen_grad, lambda / static_cast<Scalar>(n_pen));
  return out;
}

}  // namespace itvreg
