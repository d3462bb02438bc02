#pragma once

#include <optional>
#include <set>

#include "itvreg/eval.hpp"
#include "itvreg/interventions.hpp"
#include "itvreg/synthetic.hpp"
#include "itvreg/trainer.hpp"

namespace itvreg {

/// Manufactures a frozen base model: uniform init, then unregularized training
/// on `broad` (reindexed into `vocab` first).
template <typename Scalar>
EmbeddingModel<Scalar> pretrain_base(const Corpus& broad, VocabPtr vocab, Eigen::Index dim, TrainConfig config,
                                     std::uint64_t init_seed) {
  const Corpus corpus = same_vocab(broad.vocab, vocab) ? broad : broad.reindexed(vocab);
  auto init = EmbeddingModel<Scalar>::uniform_init(vocab, dim, init_seed);
  config.regularizer = RegularizerConfig{};
  auto run = train(corpus, init, init.frozen_copy(), config);
  return run.theta.frozen_copy();
}

/// The broad corpus the synthetic base model is pretrained on: the same token
/// inventory with brands drawn independently of categories and descriptors
/// corrupted at `descriptor_noise`.
SynthSpec broad_spec_for(const SynthSpec& spec, double descriptor_noise = 0.0);

/// Settings of the spurious-brand benchmark run by the acceptance suite.
struct BenchmarkConfig {
  SynthSpec synth;
  Eigen::Index dim = 32;
  double broad_descriptor_noise = 0.4;
  int base_epochs = 1;
  double base_lr = 3e-4;
  int finetune_epochs = 3;
  double finetune_lr = 1e-4;
  int batch_size = 32;
  RegularizerConfig itvreg{RegKind::ItvReg, kDefaultLambda, 0.5};

  TrainConfig base_train(std::uint64_t seed) const;
  TrainConfig finetune(std::uint64_t seed) const;
};

/// 12 brands, 4 categories with 8 descriptors each, one descriptor per
/// sentence, 504 queries and 96 items.
BenchmarkConfig benchmark_config();

struct MethodResult {
  double iid_p1 = 0.0;
  double ood_p1 = 0.0;
  std::optional<double> brand_amplification;
  std::optional<double> descriptor_amplification;
};

struct BenchmarkResult {
  std::uint64_t seed = 0;
  MethodResult base, finetune, itvreg;
  double seconds = 0.0;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config, std::uint64_t seed);

}  // namespace itvreg
