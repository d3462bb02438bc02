#include "itvreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace itvreg {

void SynthSpec::validate() const {
  if (n_categories < 2) throw Error("synth: n_categories must be >= 2");
  if (n_brands < n_categories) throw Error("synth: n_brands must be >= n_categories");
  if (queries_per_brand < 1) throw Error("synth: queries_per_brand must be >= 1");
  if (noise_tokens < 0) throw Error("synth: noise_tokens must be >= 0");
  if (descriptors_per_category < 2) throw Error("synth: descriptors_per_category must be >= 2");
  if (descriptors_per_sentence < 0 || descriptors_per_sentence > descriptors_per_category)
    throw Error("synth: descriptors_per_sentence must lie in [0, descriptors_per_category]");
  if (!(descriptor_noise >= 0.0 && descriptor_noise <= 1.0)) throw Error("synth: descriptor_noise must lie in [0,1]");
  if (noise_per_sentence < 0) throw Error("synth: noise_per_sentence must be >= 0");
  if (noise_per_sentence > 0 && noise_tokens == 0)
    throw Error("synth: noise_per_sentence > 0 needs a nonempty noise pool");
  if (items_per_brand < 1) throw Error("synth: items_per_brand must be >= 1");
  if (ood_queries_per_brand < 0 || ood_items_per_brand < 0)
    throw Error("synth: OOD counts must be >= 0");
  if (!(iid_fraction >= 0.0 && iid_fraction < 1.0)) throw Error("synth: iid_fraction must lie in [0,1)");
}

namespace {

std::string numbered(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05d", prefix, n);
  return buf;
}

std::string brand_token(int b) { return "brand" + std::to_string(b); }
std::string descriptor_token(int c, int k) { return "cat" + std::to_string(c) + "d" + std::to_string(k); }
std::string noise_token(int n) { return "noise" + std::to_string(n); }
std::string category_label(int c) { return "cat" + std::to_string(c); }

struct Draft {
  std::string id;
  int category;
  std::vector<std::string> tokens;
};

}  // namespace

SynthCorpus synth_generate(const SynthSpec& spec) {
  spec.validate();
  const int B = spec.n_brands, C = spec.n_categories;
  Rng rng(spec.seed);

  SynthCorpus out;
  out.train_category.resize(static_cast<std::size_t>(B));
  out.ood_category.resize(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) out.train_category[static_cast<std::size_t>(b)] = b % C;
  // Brands sharing a train category are spread over the other categories so
  // the OOD assignment breaks brand groups apart as well as moving them.
  for (int c = 0; c < C; ++c) {
    std::vector<int> others;
    for (int k = 0; k < C; ++k)
      if (k != c) others.push_back(k);
    std::shuffle(others.begin(), others.end(), rng);
    int slot = 0;
    for (int b = c; b < B; b += C)
      out.ood_category[static_cast<std::size_t>(b)] = others[static_cast<std::size_t>(slot++) % others.size()];
  }

  std::uniform_int_distribution<int> pick_noise(0, std::max(spec.noise_tokens - 1, 0));
  std::uniform_int_distribution<int> pick_brand(0, B - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick_other(1, C - 1);
  auto descriptor = [&](int category, int k) {
    if (spec.descriptor_noise > 0.0 && coin(rng) < spec.descriptor_noise) category = (category + pick_other(rng)) % C;
    return descriptor_token(category, k);
  };
  auto make = [&](const std::string& id, int brand, int category) {
    Draft d{id, category, {}};
    if (spec.decorrelated) brand = pick_brand(rng);
    d.tokens.push_back(brand_token(brand));
    if (spec.descriptors_per_sentence == 0) {
      for (int k = 0; k < spec.descriptors_per_category; ++k) d.tokens.push_back(descriptor(category, k));
    } else {
      std::vector<int> ks(static_cast<std::size_t>(spec.descriptors_per_category));
      for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = static_cast<int>(k);
      std::shuffle(ks.begin(), ks.end(), rng);
      ks.resize(static_cast<std::size_t>(spec.descriptors_per_sentence));
      std::sort(ks.begin(), ks.end());
      for (int k : ks) d.tokens.push_back(descriptor(category, k));
    }
    for (int k = 0; k < spec.noise_per_sentence; ++k) d.tokens.push_back(noise_token(pick_noise(rng)));
    return d;
  };

  std::vector<Draft> queries, items, ood_queries, ood_items;
  int qn = 0, in = 0;
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < spec.queries_per_brand; ++k)
      queries.push_back(make(numbered("q", qn++), b, out.train_category[static_cast<std::size_t>(b)]));
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < spec.items_per_brand; ++k)
      items.push_back(make(numbered("i", in++), b, out.train_category[static_cast<std::size_t>(b)]));
  qn = in = 0;
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < spec.ood_queries_per_brand; ++k)
      ood_queries.push_back(make(numbered("oq", qn++), b, out.ood_category[static_cast<std::size_t>(b)]));
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < spec.ood_items_per_brand; ++k)
      ood_items.push_back(make(numbered("oi", in++), b, out.ood_category[static_cast<std::size_t>(b)]));

  std::vector<std::size_t> order(queries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_iid = static_cast<std::size_t>(std::llround(spec.iid_fraction * static_cast<double>(queries.size())));
  std::vector<bool> is_iid(queries.size(), false);
  for (std::size_t i = 0; i < n_iid; ++i) is_iid[order[i]] = true;

  std::map<std::string, std::int64_t> counts;
  for (const auto* group : {&queries, &items, &ood_queries, &ood_items})
    for (const auto& d : *group)
      for (const auto& t : d.tokens) ++counts[t];
  auto vocab = std::make_shared<Vocab>(Vocab::from_counts(counts, 1));

  auto to_sentence = [&](const Draft& d) {
    Sentence s;
    for (const auto& t : d.tokens) s.push_back(vocab->id(t));
    return s;
  };
  auto add_items = [&](Corpus& c, const std::vector<Draft>& src) {
    for (const auto& d : src) {
      c.items.emplace(d.id, to_sentence(d));
      c.item_category.emplace(d.id, category_label(d.category));
    }
  };
  auto add_query = [&](Corpus& c, const Draft& d) {
    c.queries.emplace(d.id, to_sentence(d));
    c.query_category.emplace(d.id, category_label(d.category));
  };
  auto link = [](Corpus& c) {
    for (const auto& [q, qcat] : c.query_category)
      for (const auto& [i, icat] : c.item_category)
        if (qcat == icat) c.pairs.push_back({q, i, 1.0});
  };

  auto& [train, iid, ood] = out.split;
  for (Corpus* c : {&train, &iid, &ood}) c->vocab = vocab;
  add_items(train, items);
  add_items(iid, items);
  add_items(ood, items);
  add_items(ood, ood_items);
  for (std::size_t i = 0; i < queries.size(); ++i) add_query(is_iid[i] ? iid : train, queries[i]);
  for (const auto& d : ood_queries) add_query(ood, d);
  link(train);
  link(iid);
  link(ood);

  for (int b = 0; b < B; ++b) out.brand_tokens.push_back(vocab->id(brand_token(b)));
  for (int c = 0; c < C; ++c)
    for (int k = 0; k < spec.descriptors_per_category; ++k)
      out.descriptor_tokens.push_back(vocab->id(descriptor_token(c, k)));
  for (int n = 0; n < spec.noise_tokens; ++n)
    if (auto id = vocab->find(noise_token(n))) out.noise_token_ids.push_back(*id);
  return out;
}

}  // namespace itvreg
