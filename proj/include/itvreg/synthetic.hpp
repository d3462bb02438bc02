#pragma once

#include <vector>

#include "itvreg/corpus.hpp"

namespace itvreg {

/// Parameters of the brand/category benchmark. Category descriptor tokens are
/// the causal feature; the brand token is spurious: in train and IID data brand
/// b always co-occurs with category b % n_categories, in OOD data every brand
/// moves to a different category.
struct SynthSpec {
  int n_brands = 12;
  int n_categories = 4;
  int queries_per_brand = 42;
  /// Size of the noise-token pool.
  int noise_tokens = 24;
  std::uint64_t seed = 0;

  int descriptors_per_category = 2;
  /// Descriptors drawn (without replacement) per sentence; 0 keeps all of them.
  int descriptors_per_sentence = 0;
  /// Probability that a drawn descriptor is swapped for the same-index
  /// descriptor of a uniformly chosen other category.
  double descriptor_noise = 0.0;
  int noise_per_sentence = 2;
  int items_per_brand = 8;
  int ood_queries_per_brand = 8;
  int ood_items_per_brand = 4;
  double iid_fraction = 0.1;
  /// When set, brands are assigned to categories uniformly at random for every
  /// sentence (no brand/category correlation). Used to manufacture base models.
  bool decorrelated = false;

  void validate() const;
};

struct SynthCorpus {
  Split split;
  /// brand -> category used for train and IID data.
  std::vector<int> train_category;
  /// brand -> category used for OOD data; differs from train_category everywhere.
  std::vector<int> ood_category;
  std::vector<TokenId> brand_tokens;
  std::vector<TokenId> descriptor_tokens;
  std::vector<TokenId> noise_token_ids;
};

/// Generates train / IID / OOD corpora over one shared vocabulary. Train and
/// IID share the item pool; OOD additionally holds items drawn under the
/// shifted brand assignment. Relevance is 1 iff query and item share a category.
SynthCorpus synth_generate(const SynthSpec& spec);

inline SynthCorpus synth_generate(int n_brands, int n_categories, int queries_per_brand,
                                  int noise_tokens, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_brands = n_brands;
  spec.n_categories = n_categories;
  spec.queries_per_brand = queries_per_brand;
  spec.noise_tokens = noise_tokens;
  spec.seed = seed;
  return synth_generate(spec);
}

}  // namespace itvreg
