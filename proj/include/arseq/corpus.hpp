#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace arseq {

using Tokens = std::vector<std::string>;

struct UtterancePair {
  Tokens input;
  Tokens response;
};

struct EncodedPair {
  std::vector<int> input;
  std::vector<int> response;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases, expands contractions, drops sound cues, symbols and numbers,
/// and splits into word tokens.
Tokens preprocess(std::string_view text);

/// Drops pairs with an empty side or a side longer than max_len tokens.
std::vector<UtterancePair> filter_pairs(std::vector<UtterancePair> pairs, std::size_t max_len = 20);

struct RawPair {
  std::string input;
  std::string response;
};

/// Reads `input<TAB>response` lines. Lines without a tab are reported via
/// `skipped` and ignored.
std::vector<RawPair> read_pair_file(const std::filesystem::path& path, std::size_t* skipped = nullptr);

/// read_pair_file + preprocess + filter_pairs.
std::vector<UtterancePair> load_pairs(const std::filesystem::path& path, std::size_t max_len = 20);

/// Writes pairs as space-joined tokens, one `input<TAB>response` per line.
void save_pairs(const std::vector<UtterancePair>& pairs, const std::filesystem::path& path);

class Vocabulary {
 public:
  Vocabulary();

  /// Keeps the size_limit - 4 most frequent tokens (ties broken
  /// lexicographically) after the four reserved entries.
  static Vocabulary build(const std::vector<UtterancePair>& pairs, std::size_t size_limit);

  /// Entries in id order; the first four must be the reserved tokens.
  static Vocabulary from_entries(std::vector<std::pair<std::string, std::size_t>> entries);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  /// Id of a token, UNK when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  /// Fraction of corpus tokens covered at build time; empty for loaded vocabularies.
  std::optional<double> coverage() const { return coverage_; }

  std::vector<int> encode(const Tokens& tokens) const;
  Tokens decode(const std::vector<int>& ids) const;
  EncodedPair encode(const UtterancePair& pair) const { return {encode(pair.input), encode(pair.response)}; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, int> index_;
  std::optional<double> coverage_;
};

std::vector<EncodedPair> encode_pairs(const Vocabulary& vocab, const std::vector<UtterancePair>& pairs);

}  // namespace arseq
