#pragma once

// Word affect knowledge: lemma -> (valence, arousal, dominance).
//
// Raw annotations live on a [1, 9] scale. A lexicon is extended with synonym
// averages on raw values, then clipped to [clip_low, clip_high] by finalize().
// Normalized lookups subtract the neutral triple, so absent words map to zero.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace arseq {

using Vad = Eigen::Vector3d;

struct VadScale {
  double raw_min = 1.0;
  double raw_max = 9.0;
  double clip_low = 3.0;
  double clip_high = 7.0;
  Vad neutral = Vad(5.0, 3.0, 5.0);
};

class LexiconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VadLexicon {
 public:
  explicit VadLexicon(VadScale scale = {}) : scale_(scale) {}

  /// Inserts or replaces an annotated entry. Returns true if it replaced one.
  bool set(const std::string& lemma, const Vad& vad);

  bool contains(const std::string& lemma) const { return entries_.count(lemma) > 0; }
  std::optional<Vad> entry(const std::string& lemma) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, Vad>& entries() const { return entries_; }

  /// Entries added by synonym averaging rather than annotation.
  bool is_extended(const std::string& lemma) const { return extended_.count(lemma) > 0; }
  std::size_t extended_count() const { return extended_.size(); }

  void set_lemma_map(std::unordered_map<std::string, std::string> lemma_map) { lemma_map_ = std::move(lemma_map); }
  const std::string& lemma_of(const std::string& token) const;

  bool finalized() const { return finalized_; }
  const VadScale& scale() const { return scale_; }

  /// Clipped triple for a token; the neutral triple when its lemma is absent.
  Vad lookup(const std::string& token) const;
  /// lookup() minus the neutral triple. Requires a finalized lexicon.
  Vad lookup_normalized(const std::string& token) const;

  void add_extended(const std::string& lemma, const Vad& vad);
  void clip_all();

 private:
  VadScale scale_;
  std::map<std::string, Vad> entries_;
  std::set<std::string> extended_;
  std::unordered_map<std::string, std::string> lemma_map_;
  bool finalized_ = false;
};

struct LexiconLoad {
  VadLexicon lexicon;
  std::size_t rows = 0;
  std::size_t duplicates = 0;
};

LexiconLoad parse_lexicon(std::istream& in, VadScale scale = {});
LexiconLoad load_lexicon(const std::filesystem::path& path, VadScale scale = {});

/// Writes `lemma,valence,arousal,dominance` rows in lemma order.
void save_lexicon(const VadLexicon& lexicon, const std::filesystem::path& path);

using SynonymMap = std::map<std::string, std::vector<std::string>>;

SynonymMap parse_synonyms(std::istream& in);
SynonymMap load_synonyms(const std::filesystem::path& path);
std::unordered_map<std::string, std::string> parse_lemma_map(std::istream& in);
std::unordered_map<std::string, std::string> load_lemma_map(const std::filesystem::path& path);

struct ExtensionStats {
  std::size_t added = 0;
  std::size_t skipped = 0;
};

/// Gives each absent lemma the mean of its annotated synonyms' raw triples.
/// Only annotated entries act as sources, so a second pass changes nothing.
VadLexicon extend_with_synonyms(const VadLexicon& lexicon, const SynonymMap& synonyms,
                                ExtensionStats* stats = nullptr);

/// Clamps every entry elementwise to the clip interval.
VadLexicon finalize(VadLexicon lexicon);

struct FrequencyTable {
  std::unordered_map<std::string, double> p;
  std::size_t total = 0;

  double frequency(const std::string& token) const;
};

FrequencyTable term_frequency(const std::vector<std::vector<std::string>>& corpus);

enum class ImportanceMode { uniform, global, local };

ImportanceMode parse_importance_mode(std::string_view name);
std::string_view to_string(ImportanceMode mode);

struct ImportanceParams {
  double a = 1e-3;
  double epsilon = 1e-8;
};

/// Term importance for every position of a sentence given each token's
/// corpus frequency: ui -> 1, gi -> a/(a+p), li -> log(1/(p+eps)) normalized
/// over the sentence.
std::vector<double> importance_weights(std::span<const double> frequencies, ImportanceMode mode,
                                       ImportanceParams params = {});

std::vector<double> sentence_importance(const std::vector<std::string>& sentence, ImportanceMode mode,
                                        const FrequencyTable& freqs, ImportanceParams params = {});

/// Importance of `token` at its first occurrence in `sentence` (needed for li).
double term_importance(const std::string& token, ImportanceMode mode, const FrequencyTable& freqs,
                       const std::vector<std::string>& sentence, ImportanceParams params = {});

}  // namespace arseq
