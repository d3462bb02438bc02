#pragma once

#include <chrono>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "itvreg/adam.hpp"
#include "itvreg/corpus.hpp"
#include "itvreg/objectives.hpp"

namespace itvreg {

enum class NegativeStrategy { InBatchHardest, InBatchRandom };

std::string to_string(NegativeStrategy s);
NegativeStrategy parse_negative_strategy(std::string_view name);

inline constexpr int kDefaultContrastiveEpochs = 200;
inline constexpr int kDefaultMseEpochs = 5;

struct TrainConfig {
  LossKind loss = LossKind::Contrastive;
  RegularizerConfig regularizer;
  int epochs = kDefaultContrastiveEpochs;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  NegativeStrategy negatives = NegativeStrategy::InBatchHardest;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double erm = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  std::size_t batches = 0;
  std::size_t skipped = 0;
};

template <typename Scalar>
struct TrainRun {
  EmbeddingModel<Scalar> theta;
  std::vector<EpochLoss> trace;
  TrainConfig config;
  double wall_seconds = 0.0;
  /// Diagnostics for skipped examples and terms (no valid negative,
  /// degenerate encodings, unbuildable ItvAug pairs).
  std::vector<std::string> skipped;
};

/// One supervised pair as seen by the trainer.
struct TrainPair {
  const std::string* query_id = nullptr;
  const std::string* item_id = nullptr;
  const Sentence* x = nullptr;
  const Sentence* z = nullptr;
  double relevance = 1.0;
};

/// Per example: index of the batch example whose positive item becomes this
/// example's negative, or nullopt when every in-batch item is relevant.
/// Candidates are the other examples' items that are not ground-truth
/// relevant to this query. Hardest picks the maximal f(X).f(Z), ties to the
/// lowest index.
template <typename Scalar>
std::vector<std::optional<std::size_t>> mine_negatives(
    const EmbeddingModel<Scalar>& theta, std::span<const TrainPair> batch,
    const std::map<std::string, std::set<std::string>>& relevant, NegativeStrategy strategy, std::uint64_t seed) {
  if (batch.size() < 2) throw Error("negative mining needs a batch of at least 2 examples");
  std::vector<std::optional<Vec<Scalar>>> qx(batch.size()), iz(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      qx[i] = encode(theta, *batch[i].x).embedding;
    } catch (const DegenerateNormError&) {
    }
    try {
      iz[i] = encode(theta, *batch[i].z).embedding;
    } catch (const DegenerateNormError&) {
    }
  }
  static const std::set<std::string> kNone;
  Rng rng(seed);
  std::vector<std::optional<std::size_t>> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!qx[i]) continue;
    auto rel_it = relevant.find(*batch[i].query_id);
    const auto& rel = rel_it == relevant.end() ? kNone : rel_it->second;
    std::vector<std::size_t> cands;
    for (std::size_t j = 0; j < batch.size(); ++j)
      if (j != i && iz[j] && !rel.count(*batch[j].item_id)) cands.push_back(j);
    if (cands.empty()) continue;
    if (strategy == NegativeStrategy::InBatchRandom) {
      std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
      out[i] = cands[pick(rng)];
    } else {
      std::size_t best = cands.front();
      Scalar best_s = qx[i]->dot(*iz[best]);
      for (std::size_t j : cands) {
        const Scalar s = qx[i]->dot(*iz[j]);
        if (s > best_s) {
          best_s = s;
          best = j;
        }
      }
      out[i] = best;
    }
  }
  return out;
}

/// Training examples of a corpus: relevant pairs for the contrastive loss, every
/// labeled pair for the MSE loss. Pointers refer into `corpus`.
std::vector<TrainPair> training_pairs(const Corpus& corpus, LossKind loss);

/// Mini-batch training of theta (starting from theta_init) against the frozen
/// base model theta0. Deterministic in (inputs, config.seed).
template <typename Scalar>
TrainRun<Scalar> train(const Corpus& corpus, const EmbeddingModel<Scalar>& theta_init,
                       const EmbeddingModel<Scalar>& theta0, const TrainConfig& config) {
  config.validate();
  check_shared_vocab(theta_init, theta0);
  if (!same_vocab(corpus.vocab, theta0.vocab)) throw Error("corpus vocabulary differs from the model vocabulary");
  if (!theta0.table.allFinite() || !theta_init.table.allFinite()) throw Error("model holds non-finite values");
  const auto start = std::chrono::steady_clock::now();
  const auto base_checksum = theta0.checksum();

  TrainRun<Scalar> run;
  run.config = config;
  run.theta = theta_init.trainable_copy();
  SparseAdam<Scalar> adam(config.adam);

  const auto pairs = training_pairs(corpus, config.loss);
  if (pairs.empty()) throw Error("corpus has no training pairs for the " + to_string(config.loss) + " loss");
  const auto relevant = corpus.relevant_items();

  std::vector<AugmentedPair<Scalar>> augmented;
  if (config.regularizer.kind == RegKind::ItvAug) {
    auto set = build_itvaug(corpus, theta0, config.regularizer.itvaug_fraction,
                            config.regularizer.effective_mask_fraction(), mix_seed(config.seed, 0x617567ULL));
    augmented = std::move(set.pairs);
    for (auto& s : set.skipped) run.skipped.push_back("itvaug " + s);
  }

  std::vector<std::size_t> order(pairs.size());
  std::vector<std::size_t> aug_order(augmented.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t n_batches = (pairs.size() + bs - 1) / bs;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::iota(aug_order.begin(), aug_order.end(), 0);
    Rng rng(mix_seed(config.seed, 0x65706f6368ULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::shuffle(aug_order.begin(), aug_order.end(), rng);

    EpochLoss acc;
    acc.epoch = epoch;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(pairs.size(), lo + bs);
      std::vector<TrainPair> slice;
      for (std::size_t k = lo; k < hi; ++k) slice.push_back(pairs[order[k]]);
      const auto batch_seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch), b);
      const auto batch_name = "epoch " + std::to_string(epoch) + " batch " + std::to_string(b);

      Batch<Scalar> batch;
      batch.loss = config.loss;
      batch.seed = batch_seed;
      if (config.loss == LossKind::Contrastive) {
        if (slice.size() < 2) {
          run.skipped.push_back(batch_name + ": single-example batch has no negatives");
          ++acc.skipped;
          continue;
        }
        const auto neg = mine_negatives<Scalar>(run.theta, slice, relevant, config.negatives, mix_seed(batch_seed, 1));
        for (std::size_t i = 0; i < slice.size(); ++i) {
          if (!neg[i]) {
            run.skipped.push_back(batch_name + ": no valid negative for query '" + *slice[i].query_id + "'");
            ++acc.skipped;
            continue;
          }
          batch.examples.push_back({*slice[i].x, *slice[i].z, *slice[*neg[i]].z, slice[i].relevance});
        }
      } else {
        for (const auto& p : slice) batch.examples.push_back({*p.x, *p.z, std::nullopt, p.relevance});
      }
      if (batch.examples.empty()) continue;
      if (!augmented.empty()) {
        const std::size_t alo = b * augmented.size() / n_batches, ahi = (b + 1) * augmented.size() / n_batches;
        for (std::size_t k = alo; k < ahi; ++k) batch.augmented.push_back(augmented[aug_order[k]]);
      }

      auto loss = total_loss(run.theta, theta0, batch, config.regularizer);
      for (auto& s : loss.skipped) run.skipped.push_back(batch_name + ": " + s);
      acc.skipped += loss.skipped.size();
      if (!std::isfinite(static_cast<double>(loss.total)))
        throw Error("non-finite loss at " + batch_name);
      for (const auto& [t, g] : loss.gradient)
        if (!g.allFinite()) throw Error("non-finite gradient at " + batch_name + " for token " + std::to_string(t));
      adam.step(run.theta.table, loss.gradient);

      acc.erm += static_cast<double>(loss.erm);
      acc.penalty += static_cast<double>(loss.penalty);
      acc.total += static_cast<double>(loss.total);
      ++acc.batches;
    }
    if (acc.batches) {
      const auto n = static_cast<double>(acc.batches);
      acc.erm /= n;
      acc.penalty /= n;
      acc.total /= n;
    }
    run.trace.push_back(acc);
  }

  if (theta0.checksum() != base_checksum) throw Error("base model was modified during training");
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

/// Mean outreg penalty of `theta` against `theta0` over the corpus queries.
template <typename Scalar>
double mean_output_deviation(const EmbeddingModel<Scalar>& theta, const EmbeddingModel<Scalar>& theta0,
                             const Corpus& corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [id, s] : corpus.queries) {
    try {
      sum += static_cast<double>(outreg_penalty(theta, theta0, s).penalty);
      ++n;
    } catch (const DegenerateNormError&) {
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace itvreg
