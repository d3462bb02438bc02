#include "itvreg/experiment.hpp"

namespace itvreg {

SynthSpec broad_spec_for(const SynthSpec& spec, double descriptor_noise) {
  SynthSpec broad = spec;
  broad.decorrelated = true;
  broad.descriptor_noise = descriptor_noise;
  broad.seed = mix_seed(spec.seed, 0x62726f6164ULL);
  return broad;
}

TrainConfig BenchmarkConfig::base_train(std::uint64_t seed) const {
  TrainConfig c;
  c.epochs = base_epochs;
  c.batch_size = batch_size;
  c.adam.learning_rate = base_lr;
  c.seed = seed;
  return c;
}

TrainConfig BenchmarkConfig::finetune(std::uint64_t seed) const {
  TrainConfig c;
  c.epochs = finetune_epochs;
  c.batch_size = batch_size;
  c.adam.learning_rate = finetune_lr;
  c.seed = seed;
  return c;
}

BenchmarkConfig benchmark_config() {
  BenchmarkConfig c;
  c.synth.descriptors_per_category = 8;
  c.synth.descriptors_per_sentence = 1;
  c.synth.ood_items_per_brand = 0;
  return c;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config, std::uint64_t seed) {
  using Model = EmbeddingModel<float>;
  const auto start = std::chrono::steady_clock::now();
  SynthSpec spec = config.synth;
  spec.seed = seed;
  const auto data = synth_generate(spec);
  const auto broad = synth_generate(broad_spec_for(spec, config.broad_descriptor_noise));
  const auto vocab = data.split.train.vocab;

  const Model base = pretrain_base<float>(broad.split.train, vocab, config.dim, config.base_train(seed), seed + 100);
  const auto ft = train(data.split.train, base, base, config.finetune(seed));
  auto itv_config = config.finetune(seed);
  itv_config.regularizer = config.itvreg;
  const auto itv = train(data.split.train, base, base, itv_config);

  const std::set<TokenId> brands(data.brand_tokens.begin(), data.brand_tokens.end());
  const std::set<TokenId> descriptors(data.descriptor_tokens.begin(), data.descriptor_tokens.end());
  auto measure = [&](const Model& theta) {
    MethodResult m;
    m.iid_p1 = evaluate(theta, data.split.iid_eval, {1}).precision_at.at(1);
    m.ood_p1 = evaluate(theta, data.split.ood_eval, {1}).precision_at.at(1);
    m.brand_amplification = mean_amplification(theta, base, data.split.train.queries, brands);
    m.descriptor_amplification = mean_amplification(theta, base, data.split.train.queries, descriptors);
    return m;
  };

  BenchmarkResult r;
  r.seed = seed;
  r.base = measure(base);
  r.finetune = measure(ft.theta);
  r.itvreg = measure(itv.theta);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace itvreg
