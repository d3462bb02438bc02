#include "itvreg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace itvreg {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.emplace_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : tokens_{std::string(kUnkToken)}, freqs_{0} {
  index_.emplace(tokens_[0], kUnk);
}

Vocab Vocab::from_counts(const std::map<std::string, std::int64_t>& counts,
                         std::int64_t min_freq) {
  if (min_freq < 1) throw Error("min_freq must be >= 1, got " + std::to_string(min_freq));
  std::vector<std::pair<std::string, std::int64_t>> kept;
  std::int64_t unk = 0;
  for (const auto& [tok, n] : counts) {
    if (tok == kUnkToken) {
      unk += n;
    } else if (n >= min_freq) {
      kept.emplace_back(tok, n);
    } else {
      unk += n;
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  v.freqs_[0] = unk;
  for (auto& [tok, n] : kept) {
    v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tok);
    v.freqs_.push_back(n);
  }
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  return find(token).value_or(kUnk);
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw Error("token id " + std::to_string(id) + " outside vocab of size " +
                std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::int64_t Vocab::frequency(TokenId id) const {
  token(id);
  return freqs_[static_cast<std::size_t>(id)];
}

Sentence Vocab::encode_text(std::string_view text) const {
  Sentence s;
  for (const auto& t : tokenize(text)) s.push_back(id(t));
  return s;
}

std::string Vocab::decode(const Sentence& s) const {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(' ');
    out += token(s[i]);
  }
  return out;
}

void Vocab::save_tsv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write vocab file " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    os << tokens_[i] << '\t' << i << '\t' << freqs_[i] << '\n';
  if (!os) throw Error("write failed for vocab file " + path.string());
}

Vocab Vocab::load_tsv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open vocab file " + path.string());
  Vocab v;
  v.tokens_.clear();
  v.freqs_.clear();
  v.index_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    std::string tok = line.substr(0, t1);
    long long id = 0, freq = 0;
    try {
      id = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
      freq = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed id or frequency");
    }
    if (id != static_cast<long long>(v.tokens_.size()))
      throw Error(path.string() + ":" + std::to_string(lineno) + ": ids must be dense and sorted");
    if (!v.index_.emplace(tok, static_cast<TokenId>(id)).second)
      throw Error(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" + tok + "'");
    v.tokens_.push_back(tok);
    v.freqs_.push_back(freq);
  }
  if (v.tokens_.empty() || v.tokens_[0] != kUnkToken)
    throw Error(path.string() + ": first entry must be " + std::string(kUnkToken));
  return v;
}

bool same_vocab(const VocabPtr& a, const VocabPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->tokens() == b->tokens();
}

// ---------------------------------------------------------------------------
// Corpus

std::map<std::string, std::int64_t> Corpus::item_frequency() const {
  std::map<std::string, std::int64_t> f;
  for (const auto& [id, s] : items) f[id] = 0;
  for (const auto& p : pairs) ++f[p.item];
  return f;
}

std::map<std::string, std::set<std::string>> Corpus::relevant_items() const {
  std::map<std::string, std::set<std::string>> rel;
  for (const auto& [id, s] : queries) rel[id];
  for (const auto& p : pairs)
    if (p.relevance >= 0.5) rel[p.query].insert(p.item);
  return rel;
}

bool Corpus::has_labeled_negatives() const {
  return std::any_of(pairs.begin(), pairs.end(), [](const Pair& p) { return p.relevance < 0.5; });
}

void Corpus::validate() const {
  if (!vocab) throw Error("corpus has no vocabulary");
  auto check = [&](const std::string& kind, const std::string& id, const Sentence& s) {
    if (s.empty()) throw Error(kind + " '" + id + "' has an empty sentence");
    for (TokenId t : s)
      if (t < 0 || static_cast<std::size_t>(t) >= vocab->size())
        throw Error(kind + " '" + id + "' has token id " + std::to_string(t) + " outside vocab");
  };
  for (const auto& [id, s] : queries) check("query", id, s);
  for (const auto& [id, s] : items) check("item", id, s);
  for (const auto& p : pairs) {
    if (!queries.count(p.query)) throw Error("pair references unknown query id '" + p.query + "'");
    if (!items.count(p.item)) throw Error("pair references unknown item id '" + p.item + "'");
    if (!(p.relevance >= 0.0 && p.relevance <= 1.0))
      throw Error("pair (" + p.query + ", " + p.item + ") relevance outside [0,1]");
  }
}

Corpus Corpus::reindexed(VocabPtr target) const {
  Corpus out = *this;
  out.vocab = target;
  auto remap = [&](Sentence& s) {
    for (auto& t : s) t = target->id(vocab->token(t));
  };
  for (auto& [id, s] : out.queries) remap(s);
  for (auto& [id, s] : out.items) remap(s);
  return out;
}

Corpus parse_corpus(std::string_view jsonl, std::string_view origin) {
  struct Raw {
    std::string text;
    std::size_t line;
  };
  std::map<std::string, Raw> qtext, itext;
  Corpus c;
  std::vector<std::size_t> pair_lines;
  std::istringstream is{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(std::string(origin) + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw fail("malformed JSON");
    }
    if (!rec.is_object() || !rec.contains("kind") || !rec["kind"].is_string())
      throw fail("record must be an object with a string \"kind\"");
    const auto kind = rec["kind"].get<std::string>();
    try {
      if (kind == "query" || kind == "item") {
        auto id = rec.at("id").get<std::string>();
        auto text = rec.at("text").get<std::string>();
        auto& table = kind == "query" ? qtext : itext;
        if (!table.emplace(id, Raw{text, lineno}).second)
          throw fail("duplicate " + kind + " id '" + id + "'");
        if (rec.contains("category") && !rec["category"].is_null()) {
          auto cat = rec["category"].get<std::string>();
          (kind == "query" ? c.query_category : c.item_category)[id] = cat;
        }
      } else if (kind == "pair") {
        Pair p{rec.at("query").get<std::string>(), rec.at("item").get<std::string>(),
               rec.at("relevance").get<double>()};
        if (!(p.relevance >= 0.0 && p.relevance <= 1.0))
          throw fail("relevance " + std::to_string(p.relevance) + " outside [0,1]");
        c.pairs.push_back(std::move(p));
        pair_lines.push_back(lineno);
      } else {
        throw fail("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw fail(std::string("bad field: ") + e.what());
    }
  }

  std::map<std::string, std::int64_t> counts;
  std::map<std::string, std::vector<std::string>> qtok, itok;
  for (auto* src : {&qtext, &itext}) {
    auto& dst = src == &qtext ? qtok : itok;
    for (const auto& [id, raw] : *src) {
      auto toks = tokenize(raw.text);
      if (toks.empty()) {
        lineno = raw.line;
        throw fail("text of '" + id + "' has no tokens");
      }
      for (const auto& t : toks) ++counts[t];
      dst.emplace(id, std::move(toks));
    }
  }
  auto vocab = std::make_shared<Vocab>(Vocab::from_counts(counts, 1));
  c.vocab = vocab;
  auto to_ids = [&](const std::vector<std::string>& toks) {
    Sentence s;
    s.reserve(toks.size());
    for (const auto& t : toks) s.push_back(vocab->id(t));
    return s;
  };
  for (const auto& [id, toks] : qtok) c.queries.emplace(id, to_ids(toks));
  for (const auto& [id, toks] : itok) c.items.emplace(id, to_ids(toks));
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    lineno = pair_lines[i];
    if (!c.queries.count(c.pairs[i].query))
      throw fail("pair references unknown query id '" + c.pairs[i].query + "'");
    if (!c.items.count(c.pairs[i].item))
      throw fail("pair references unknown item id '" + c.pairs[i].item + "'");
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open corpus file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_corpus(ss.str(), path.string());
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  auto emit = [&](const char* kind, const std::string& id, const Sentence& s,
                  const std::map<std::string, std::string>& cats) {
    json rec;
    rec["kind"] = kind;
    rec["id"] = id;
    rec["text"] = corpus.vocab->decode(s);
    if (auto it = cats.find(id); it != cats.end()) rec["category"] = it->second;
    out += rec.dump();
    out.push_back('\n');
  };
  for (const auto& [id, s] : corpus.queries) emit("query", id, s, corpus.query_category);
  for (const auto& [id, s] : corpus.items) emit("item", id, s, corpus.item_category);
  for (const auto& p : corpus.pairs) {
    json rec;
    rec["kind"] = "pair";
    rec["query"] = p.query;
    rec["item"] = p.item;
    rec["relevance"] = p.relevance;
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write corpus file " + path.string());
  os << corpus_to_jsonl(corpus);
  if (!os) throw Error("write failed for corpus file " + path.string());
}

Vocab build_vocab(const Corpus& corpus, std::int64_t min_freq) {
  if (min_freq < 1) throw Error("min_freq must be >= 1, got " + std::to_string(min_freq));
  if (corpus.queries.empty() && corpus.items.empty()) throw Error("cannot build vocab from empty corpus");
  std::map<std::string, std::int64_t> counts;
  for (const auto* table : {&corpus.queries, &corpus.items})
    for (const auto& [id, s] : *table)
      for (TokenId t : s) ++counts[corpus.vocab->token(t)];
  return Vocab::from_counts(counts, min_freq);
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("split fraction must lie in [0,1]");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error("train fraction must lie in (0,1]");
  if (kind == SplitKind::CategoryHoldout && held_out.empty() && held_out_top_k == 0)
    throw Error("category holdout needs at least one held-out category");
}

namespace {

Corpus with_queries(const Corpus& src, const std::vector<std::string>& qids) {
  Corpus out;
  out.vocab = src.vocab;
  out.items = src.items;
  out.item_category = src.item_category;
  std::set<std::string> keep(qids.begin(), qids.end());
  for (const auto& q : keep) {
    out.queries.emplace(q, src.queries.at(q));
    if (auto it = src.query_category.find(q); it != src.query_category.end())
      out.query_category.emplace(q, it->second);
  }
  for (const auto& p : src.pairs)
    if (keep.count(p.query)) out.pairs.push_back(p);
  return out;
}

}  // namespace

Split split_by_category(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  if (spec.kind != SplitKind::CategoryHoldout) throw Error("split_by_category needs a category-holdout spec");
  if (corpus.query_category.empty()) throw Error("corpus has no category labels");
  std::map<std::string, std::int64_t> cat_count;
  for (const auto& [q, s] : corpus.queries) {
    auto it = corpus.query_category.find(q);
    if (it == corpus.query_category.end()) throw Error("query '" + q + "' has no category label");
    ++cat_count[it->second];
  }

  std::vector<std::string> held = spec.held_out;
  if (held.empty()) {
    std::vector<std::pair<std::string, std::int64_t>> ranked(cat_count.begin(), cat_count.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (spec.held_out_top_k > ranked.size())
      throw Error("cannot hold out " + std::to_string(spec.held_out_top_k) + " categories; only " +
                  std::to_string(ranked.size()) + " exist");
    for (std::size_t i = 0; i < spec.held_out_top_k; ++i) held.push_back(ranked[i].first);
  }
  for (const auto& h : held)
    if (!cat_count.count(h)) throw Error("held-out category '" + h + "' matches no query");

  std::set<std::string> held_set(held.begin(), held.end());
  std::vector<std::string> ood, rest;
  for (const auto& [q, s] : corpus.queries)
    (held_set.count(corpus.query_category.at(q)) ? ood : rest).push_back(q);
  if (rest.empty()) throw Error("holding out every category leaves an empty train split");

  Rng rng(spec.seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(rest.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, rest.size());
  std::vector<std::string> train(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::string> iid(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
  return {with_queries(corpus, train), with_queries(corpus, iid), with_queries(corpus, ood)};
}

Corpus interpolate_ood(const Corpus& iid_eval, const Corpus& ood_pool, double fraction,
                       std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error("interpolation fraction must lie in [0,1], got " + std::to_string(fraction));
  if (!same_vocab(iid_eval.vocab, ood_pool.vocab)) throw Error("iid and ood corpora use different vocabularies");

  std::vector<std::string> candidates;
  for (const auto& [id, s] : ood_pool.items)
    if (!iid_eval.items.count(id)) candidates.push_back(id);
  Rng rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  auto n_add = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(candidates.size()) + 1e-9));
  n_add = std::min(n_add, candidates.size());

  Corpus out = iid_eval;
  std::set<std::string> added(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_add));
  for (const auto& id : added) {
    out.items.emplace(id, ood_pool.items.at(id));
    if (auto it = ood_pool.item_category.find(id); it != ood_pool.item_category.end())
      out.item_category.emplace(id, it->second);
  }
  std::set<std::string> new_queries;
  for (const auto& p : ood_pool.pairs)
    if (p.relevance >= 0.5 && added.count(p.item) && !iid_eval.queries.count(p.query))
      new_queries.insert(p.query);
  for (const auto& q : new_queries) {
    out.queries.emplace(q, ood_pool.queries.at(q));
    if (auto it = ood_pool.query_category.find(q); it != ood_pool.query_category.end())
      out.query_category.emplace(q, it->second);
  }
  for (const auto& p : ood_pool.pairs) {
    bool q_in = new_queries.count(p.query) > 0;
    bool i_new = added.count(p.item) > 0;
    // New queries bring every pair that lands inside the output; existing
    // queries only gain pairs to newly added items.
    if ((q_in && out.items.count(p.item)) || (i_new && iid_eval.queries.count(p.query)))
      out.pairs.push_back(p);
  }
  return out;
}

std::map<std::string, int> item_frequency_quantiles(const Corpus& corpus, int n_bins) {
  if (n_bins < 1) throw Error("n_bins must be >= 1");
  auto freq = corpus.item_frequency();
  if (static_cast<std::size_t>(n_bins) > freq.size())
    throw Error("n_bins (" + std::to_string(n_bins) + ") exceeds item count (" +
                std::to_string(freq.size()) + ")");
  std::vector<std::pair<std::int64_t, std::string>> order;
  for (const auto& [id, n] : freq) order.emplace_back(n, id);
  std::sort(order.begin(), order.end());
  std::map<std::string, int> bins;
  const auto total = order.size();
  for (std::size_t i = 0; i < total; ++i)
    bins[order[i].second] = static_cast<int>(i * static_cast<std::size_t>(n_bins) / total);
  return bins;
}

}  // namespace itvreg
