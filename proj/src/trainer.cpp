#include "itvreg/trainer.hpp"

namespace itvreg {

std::string to_string(NegativeStrategy s) {
  return s == NegativeStrategy::InBatchHardest ? "in-batch-hardest" : "in-batch-random";
}

NegativeStrategy parse_negative_strategy(std::string_view name) {
  if (name == "in-batch-hardest") return NegativeStrategy::InBatchHardest;
  if (name == "in-batch-random") return NegativeStrategy::InBatchRandom;
  throw Error("unknown negative strategy '" + std::string(name) + "' (in-batch-hardest|in-batch-random)");
}

void TrainConfig::validate() const {
  regularizer.validate();
  if (epochs < 1) throw Error("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (loss == LossKind::Contrastive && batch_size < 2)
    throw Error("in-batch negative mining needs batch size >= 2");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate))
    throw Error("learning rate must be finite and >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw Error("adam betas must lie in [0,1)");
  if (!(adam.eps > 0.0)) throw Error("adam eps must be > 0");
}

std::vector<TrainPair> training_pairs(const Corpus& corpus, LossKind loss) {
  std::vector<TrainPair> out;
  for (const auto& p : corpus.pairs) {
    if (loss == LossKind::Contrastive && p.relevance < 0.5) continue;
    auto q = corpus.queries.find(p.query);
    auto i = corpus.items.find(p.item);
    if (q == corpus.queries.end() || i == corpus.items.end())
      throw Error("pair (" + p.query + ", " + p.item + ") has dangling ids");
    out.push_back({&q->first, &i->first, &q->second, &i->second, p.relevance});
  }
  return out;
}

}  // namespace itvreg
