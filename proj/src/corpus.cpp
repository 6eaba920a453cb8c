#include "arseq/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>

#include "arseq/tokens.hpp"
#include "text_util.hpp"

namespace arseq {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kIrregular{{
    {"can't", "can not"},     {"cannot", "can not"},   {"won't", "will not"},   {"shan't", "shall not"},
    {"ain't", "is not"},      {"let's", "let us"},     {"y'all", "you all"},    {"it's", "it is"},
    {"that's", "that is"},    {"what's", "what is"},   {"there's", "there is"}, {"here's", "here is"},
    {"he's", "he is"},        {"she's", "she is"},     {"where's", "where is"}, {"who's", "who is"},
    {"how's", "how is"},      {"why's", "why is"},     {"when's", "when is"},   {"everybody's", "everybody is"},
    {"everyone's", "everyone is"}, {"somebody's", "somebody is"}, {"nobody's", "nobody is"}, {"o'clock", "of the clock"},
}};

constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kSuffixes{{
    {"n't", " not"}, {"'re", " are"}, {"'ve", " have"}, {"'ll", " will"}, {"'d", " would"}, {"'m", " am"}, {"'s", ""},
}};

// Capitalized abbreviations that are words, not sound cues.
constexpr std::array<std::string_view, 9> kUpperAllowed{{"ok", "tv", "us", "usa", "uk", "dj", "id", "ai", "am"}};

bool is_word_byte(unsigned char c) { return std::isalpha(c) || c >= 0x80; }

std::string strip_brackets(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  int depth = 0;
  for (char c : text) {
    if (c == '[' || c == '(') {
      ++depth;
      out.push_back(' ');
      continue;
    }
    if ((c == ']' || c == ')') && depth > 0) {
      --depth;
      continue;
    }
    if (depth == 0) out.push_back(c);
  }
  return out;
}

// A raw word whose letters are all upper case (two or more) is a sound cue
// such as "BANG".
bool is_sound_cue(std::string_view word) {
  std::string letters;
  bool any_lower = false;
  for (unsigned char c : word) {
    if (std::isalpha(c)) {
      letters.push_back(static_cast<char>(std::tolower(c)));
      any_lower = any_lower || std::islower(c);
    }
  }
  if (any_lower || letters.size() < 2) return false;
  if (word.find('\'') != std::string_view::npos) return false;
  return std::find(kUpperAllowed.begin(), kUpperAllowed.end(), letters) == kUpperAllowed.end();
}

std::string expand(std::string word) {
  for (const auto& [from, to] : kIrregular)
    if (word == from) return std::string(to);
  for (const auto& [suffix, rep] : kSuffixes) {
    if (word.size() > suffix.size() && word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0)
      return word.substr(0, word.size() - suffix.size()) + std::string(rep);
  }
  return word;
}

void split_words(std::string_view s, Tokens& out) {
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
}

}  // namespace

Tokens preprocess(std::string_view text) {
  std::string s = strip_brackets(text);
  // typographic apostrophe (U+2019) -> '
  for (std::size_t pos; (pos = s.find("\xE2\x80\x99")) != std::string::npos;) s.replace(pos, 3, "'");

  Tokens out;
  for (const auto& raw : text::split(s, ' ')) {
    for (const auto& piece : text::split(raw, '\t')) {
      if (piece.empty() || is_sound_cue(piece)) continue;
      std::string word;
      word.reserve(piece.size());
      for (unsigned char c : piece) word.push_back(static_cast<char>(std::tolower(c)));
      // trim leading/trailing punctuation but keep inner apostrophes for expansion
      const auto b = std::find_if(word.begin(), word.end(), [](unsigned char c) {
        return is_word_byte(c) || c == '\'';
      });
      if (b == word.end()) continue;
      word.erase(word.begin(), b);
      while (!word.empty() && !is_word_byte(static_cast<unsigned char>(word.back()))) word.pop_back();
      while (!word.empty() && word.front() == '\'') word.erase(0, 1);
      if (word.empty()) continue;
      split_words(expand(std::move(word)), out);
    }
  }
  return out;
}

std::vector<UtterancePair> filter_pairs(std::vector<UtterancePair> pairs, std::size_t max_len) {
  std::erase_if(pairs, [max_len](const UtterancePair& p) {
    return p.input.empty() || p.response.empty() || p.input.size() > max_len || p.response.size() > max_len;
  });
  return pairs;
}

std::vector<RawPair> read_pair_file(const std::filesystem::path& path, std::size_t* skipped) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<RawPair> out;
  std::size_t bad = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) text::strip_bom(line);
    first = false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      ++bad;
      continue;
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (skipped) *skipped = bad;
  return out;
}

std::vector<UtterancePair> load_pairs(const std::filesystem::path& path, std::size_t max_len) {
  std::vector<UtterancePair> pairs;
  for (const auto& raw : read_pair_file(path)) pairs.push_back({preprocess(raw.input), preprocess(raw.response)});
  return filter_pairs(std::move(pairs), max_len);
}

namespace {
std::string join(const Tokens& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s.push_back(' ');
    s += toks[i];
  }
  return s;
}
}  // namespace

void save_pairs(const std::vector<UtterancePair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& p : pairs) out << join(p.input) << '\t' << join(p.response) << '\n';
}

Vocabulary::Vocabulary() {
  for (auto tok : {kPadToken, kSosToken, kEosToken, kUnkToken}) {
    index_.emplace(std::string(tok), static_cast<int>(tokens_.size()));
    tokens_.emplace_back(tok);
    counts_.push_back(0);
  }
}

Vocabulary Vocabulary::build(const std::vector<UtterancePair>& pairs, std::size_t size_limit) {
  if (size_limit < static_cast<std::size_t>(kNumSpecial) + 1)
    throw std::invalid_argument("vocabulary size limit must be at least 5 (4 reserved tokens + 1)");
  if (pairs.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty pair set");
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& p : pairs) {
    for (const auto* side : {&p.input, &p.response}) {
      for (const auto& tok : *side) ++counts[tok];
      total += side->size();
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::erase_if(ranked, [](const auto& e) { return is_special_token(e.first); });
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), size_limit - kNumSpecial);
  Vocabulary v;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < keep; ++i) {
    v.index_.emplace(ranked[i].first, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(ranked[i].first);
    v.counts_.push_back(ranked[i].second);
    covered += ranked[i].second;
  }
  v.coverage_ = total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
  return v;
}

Vocabulary Vocabulary::from_entries(std::vector<std::pair<std::string, std::size_t>> entries) {
  if (entries.size() < static_cast<std::size_t>(kNumSpecial))
    throw CorpusError("vocabulary needs the four reserved tokens");
  const std::array<std::string_view, 4> reserved{kPadToken, kSosToken, kEosToken, kUnkToken};
  for (int i = 0; i < kNumSpecial; ++i)
    if (entries[static_cast<std::size_t>(i)].first != reserved[static_cast<std::size_t>(i)])
      throw CorpusError("vocabulary entry " + std::to_string(i) + " must be " + std::string(reserved[i]));
  Vocabulary v;
  v.tokens_.clear();
  v.counts_.clear();
  v.index_.clear();
  for (auto& [tok, c] : entries) {
    if (!v.index_.emplace(tok, static_cast<int>(v.tokens_.size())).second)
      throw CorpusError("duplicate vocabulary token '" + tok + "'");
    v.tokens_.push_back(std::move(tok));
    v.counts_.push_back(c);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw CorpusError("vocabulary line " + std::to_string(lineno) + ": missing tab");
    const auto c = text::parse_double(std::string_view(line).substr(tab + 1));
    if (!c || *c < 0) throw CorpusError("vocabulary line " + std::to_string(lineno) + ": bad count");
    entries.emplace_back(line.substr(0, tab), static_cast<std::size_t>(*c));
  }
  return from_entries(std::move(entries));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Tokens Vocabulary::decode(const std::vector<int>& ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::vector<EncodedPair> encode_pairs(const Vocabulary& vocab, const std::vector<UtterancePair>& pairs) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(vocab.encode(p));
  return out;
}

}  // namespace arseq
