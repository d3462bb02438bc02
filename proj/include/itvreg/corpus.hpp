#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "itvreg/common.hpp"

namespace itvreg {

/// Lowercases, splits on whitespace and strips leading/trailing punctuation.
/// Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view text);

/// Token-string <-> id map. Id 0 is reserved for UNK; ids are dense.
class Vocab {
public:
  static constexpr TokenId kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  /// Builds from (token, frequency) counts. Tokens below `min_freq` fold into
  /// UNK; the rest get ids 1.. in descending frequency, ties lexicographic.
  static Vocab from_counts(const std::map<std::string, std::int64_t>& counts,
                           std::int64_t min_freq);

  std::size_t size() const { return tokens_.size(); }
  /// Number of mapped tokens, UNK excluded.
  std::size_t token_count() const { return tokens_.size() - 1; }

  TokenId id(std::string_view token) const;  // UNK for unknown tokens
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::int64_t frequency(TokenId id) const;

  Sentence encode_text(std::string_view text) const;
  std::string decode(const Sentence& s) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocab& other) const {
    return tokens_ == other.tokens_ && freqs_ == other.freqs_;
  }

  /// TSV `token<TAB>id<TAB>frequency`, one line per id, ascending.
  void save_tsv(const std::filesystem::path& path) const;
  static Vocab load_tsv(const std::filesystem::path& path);

private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<std::string, TokenId> index_;
};

using VocabPtr = std::shared_ptr<const Vocab>;

/// Returns true when both vocabularies describe the same id space.
bool same_vocab(const VocabPtr& a, const VocabPtr& b);

struct Pair {
  std::string query;
  std::string item;
  double relevance = 1.0;
};

/// Queries, items and relevance pairs over one vocabulary. Maps are ordered by
/// id so every traversal is deterministic.
struct Corpus {
  VocabPtr vocab;
  std::map<std::string, Sentence> queries;
  std::map<std::string, Sentence> items;
  std::vector<Pair> pairs;
  std::map<std::string, std::string> query_category;
  std::map<std::string, std::string> item_category;

  /// Item id -> number of pairs mentioning it (0 for unpaired items).
  std::map<std::string, std::int64_t> item_frequency() const;
  /// Query id -> ids of items with relevance >= 0.5.
  std::map<std::string, std::set<std::string>> relevant_items() const;
  bool has_labeled_negatives() const;

  /// Throws if any invariant is violated (dangling ids, relevance range,
  /// token ids outside the vocabulary, empty sentences).
  void validate() const;

  /// Remaps every sentence into `target` through token strings; tokens the
  /// target does not know become UNK.
  Corpus reindexed(VocabPtr target) const;
};

/// Reads the JSONL corpus format. The returned corpus carries a vocabulary
/// built with min_freq 1.
Corpus load_corpus(const std::filesystem::path& path);
/// Parses JSONL text directly; `origin` is used in error messages.
Corpus parse_corpus(std::string_view jsonl, std::string_view origin = "<memory>");
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_jsonl(const Corpus& corpus);

Vocab build_vocab(const Corpus& corpus, std::int64_t min_freq);

enum class SplitKind { CategoryHoldout, Interpolation, Random };

struct SplitSpec {
  SplitKind kind = SplitKind::CategoryHoldout;
  std::vector<std::string> held_out;
  /// When `held_out` is empty, hold out this many most frequent categories.
  std::size_t held_out_top_k = 0;
  double fraction = 0.0;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  Corpus train;
  Corpus iid_eval;
  Corpus ood_eval;
};

Split split_by_category(const Corpus& corpus, const SplitSpec& spec);

/// Augments `iid_eval` with a seeded prefix of `ood_pool`'s new items (those
/// not already in iid_eval) together with the queries relevant to them.
Corpus interpolate_ood(const Corpus& iid_eval, const Corpus& ood_pool, double fraction,
                       std::uint64_t seed);

/// Item id -> bin in [0, n_bins), equal-count bins over items sorted by
/// ascending pair frequency (ties by id). Bin 0 is the tail.
std::map<std::string, int> item_frequency_quantiles(const Corpus& corpus, int n_bins);

}  // namespace itvreg
