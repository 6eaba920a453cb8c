#include "arseq/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <sstream>

#include "arseq/tokens.hpp"
#include "text_util.hpp"

namespace arseq {

bool VadLexicon::set(const std::string& lemma, const Vad& vad) {
  extended_.erase(lemma);
  const bool replaced = entries_.count(lemma) > 0;
  entries_[lemma] = vad;
  return replaced;
}

void VadLexicon::add_extended(const std::string& lemma, const Vad& vad) {
  entries_[lemma] = vad;
  extended_.insert(lemma);
}

void VadLexicon::clip_all() {
  for (auto& [lemma, vad] : entries_) vad = vad.cwiseMax(scale_.clip_low).cwiseMin(scale_.clip_high);
  finalized_ = true;
}

std::optional<Vad> VadLexicon::entry(const std::string& lemma) const {
  auto it = entries_.find(lemma);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const std::string& VadLexicon::lemma_of(const std::string& token) const {
  auto it = lemma_map_.find(token);
  return it == lemma_map_.end() ? token : it->second;
}

Vad VadLexicon::lookup(const std::string& token) const {
  if (is_special_token(token)) return scale_.neutral;
  auto it = entries_.find(lemma_of(token));
  if (it == entries_.end()) return scale_.neutral;
  return it->second;
}

Vad VadLexicon::lookup_normalized(const std::string& token) const {
  if (!finalized_) throw std::logic_error("lookup_normalized on a lexicon that was not finalized");
  return lookup(token) - scale_.neutral;
}

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open " + path.string());
  return in;
}

}  // namespace

LexiconLoad parse_lexicon(std::istream& in, VadScale scale) {
  LexiconLoad out{VadLexicon(scale), 0, 0};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) text::strip_bom(line);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    if (!header) {
      if (body != "lemma,valence,arousal,dominance")
        throw LexiconError("line " + std::to_string(lineno) + ": expected header lemma,valence,arousal,dominance");
      header = true;
      continue;
    }
    const auto fields = text::split(body, ',');
    if (fields.size() != 4)
      throw LexiconError("line " + std::to_string(lineno) + ": expected 4 fields, got " +
                         std::to_string(fields.size()));
    const std::string lemma(text::trim(fields[0]));
    if (lemma.empty()) throw LexiconError("line " + std::to_string(lineno) + ": empty lemma");
    Vad vad;
    for (int k = 0; k < 3; ++k) {
      const auto v = text::parse_double(fields[k + 1]);
      if (!v) throw LexiconError("line " + std::to_string(lineno) + ": malformed number '" + fields[k + 1] + "'");
      if (*v < scale.raw_min || *v > scale.raw_max)
        throw LexiconError("line " + std::to_string(lineno) + ": value " + fields[k + 1] + " outside [" +
                           std::to_string(scale.raw_min) + ", " + std::to_string(scale.raw_max) + "]");
      vad[k] = *v;
    }
    if (out.lexicon.set(lemma, vad)) ++out.duplicates;
    ++out.rows;
  }
  if (!header) throw LexiconError("missing header lemma,valence,arousal,dominance");
  return out;
}

LexiconLoad load_lexicon(const std::filesystem::path& path, VadScale scale) {
  auto in = open_or_throw(path);
  return parse_lexicon(in, scale);
}

void save_lexicon(const VadLexicon& lexicon, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LexiconError("cannot write " + path.string());
  out << "lemma,valence,arousal,dominance\n" << std::setprecision(17);
  for (const auto& [lemma, vad] : lexicon.entries())
    out << lemma << ',' << vad[0] << ',' << vad[1] << ',' << vad[2] << '\n';
}

SynonymMap parse_synonyms(std::istream& in) {
  SynonymMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) text::strip_bom(line);
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto comma = body.find(',');
    if (comma == std::string_view::npos)
      throw LexiconError("synonyms line " + std::to_string(lineno) + ": expected lemma,syn1;syn2;...");
    const std::string lemma(text::trim(body.substr(0, comma)));
    if (lemma == "lemma" && lineno == 1) continue;
    auto& syns = out[lemma];
    for (const auto& s : text::split(body.substr(comma + 1), ';')) {
      const auto t = text::trim(s);
      if (!t.empty()) syns.emplace_back(t);
    }
  }
  return out;
}

SynonymMap load_synonyms(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_synonyms(in);
}

std::unordered_map<std::string, std::string> parse_lemma_map(std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) text::strip_bom(line);
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = text::split(body, ',');
    if (fields.size() != 2)
      throw LexiconError("lemma map line " + std::to_string(lineno) + ": expected token,lemma");
    const std::string token(text::trim(fields[0]));
    if (lineno == 1 && token == "token") continue;
    out[token] = std::string(text::trim(fields[1]));
  }
  return out;
}

std::unordered_map<std::string, std::string> load_lemma_map(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_lemma_map(in);
}

VadLexicon extend_with_synonyms(const VadLexicon& lexicon, const SynonymMap& synonyms, ExtensionStats* stats) {
  VadLexicon out = lexicon;
  ExtensionStats local;
  for (const auto& [lemma, syns] : synonyms) {
    if (lexicon.contains(lemma)) continue;
    Vad total = Vad::Zero();
    std::size_t present = 0;
    for (const auto& s : syns) {
      if (!lexicon.contains(s) || lexicon.is_extended(s)) continue;
      total += *lexicon.entry(s);
      ++present;
    }
    if (present == 0) {
      ++local.skipped;
      continue;
    }
    out.add_extended(lemma, total / static_cast<double>(present));
    ++local.added;
  }
  if (stats) *stats = local;
  return out;
}

VadLexicon finalize(VadLexicon lexicon) {
  lexicon.clip_all();
  return lexicon;
}

double FrequencyTable::frequency(const std::string& token) const {
  auto it = p.find(token);
  return it == p.end() ? 0.0 : it->second;
}

FrequencyTable term_frequency(const std::vector<std::vector<std::string>>& corpus) {
  std::unordered_map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
    total += sentence.size();
  }
  if (total == 0) throw std::invalid_argument("term_frequency: empty corpus");
  FrequencyTable out;
  out.total = total;
  for (const auto& [tok, c] : counts) out.p[tok] = static_cast<double>(c) / static_cast<double>(total);
  return out;
}

ImportanceMode parse_importance_mode(std::string_view name) {
  if (name == "ui") return ImportanceMode::uniform;
  if (name == "gi") return ImportanceMode::global;
  if (name == "li") return ImportanceMode::local;
  throw std::invalid_argument("unknown importance mode '" + std::string(name) + "' (expected ui, gi or li)");
}

std::string_view to_string(ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::uniform: return "ui";
    case ImportanceMode::global: return "gi";
    case ImportanceMode::local: return "li";
  }
  return "ui";
}

std::vector<double> importance_weights(std::span<const double> frequencies, ImportanceMode mode,
                                       ImportanceParams params) {
  std::vector<double> out(frequencies.size());
  switch (mode) {
    case ImportanceMode::uniform:
      std::fill(out.begin(), out.end(), 1.0);
      break;
    case ImportanceMode::global:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = params.a / (params.a + frequencies[i]);
      break;
    case ImportanceMode::local: {
      if (frequencies.empty()) throw std::invalid_argument("local importance needs a non-empty sentence");
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(1.0 / (frequencies[i] + params.epsilon));
      const double z = std::accumulate(out.begin(), out.end(), 0.0);
      for (double& v : out) v /= z;
      break;
    }
  }
  return out;
}

std::vector<double> sentence_importance(const std::vector<std::string>& sentence, ImportanceMode mode,
                                        const FrequencyTable& freqs, ImportanceParams params) {
  std::vector<double> f;
  f.reserve(sentence.size());
  for (const auto& tok : sentence) f.push_back(freqs.frequency(tok));
  return importance_weights(f, mode, params);
}

double term_importance(const std::string& token, ImportanceMode mode, const FrequencyTable& freqs,
                       const std::vector<std::string>& sentence, ImportanceParams params) {
  if (mode != ImportanceMode::local) {
    const double f = freqs.frequency(token);
    return importance_weights(std::span<const double>(&f, 1), mode, params).front();
  }
  if (sentence.empty()) throw std::invalid_argument("local importance needs a non-empty sentence");
  const auto it = std::find(sentence.begin(), sentence.end(), token);
  if (it == sentence.end()) throw std::invalid_argument("token '" + token + "' does not occur in the sentence");
  return sentence_importance(sentence, mode, freqs, params)[static_cast<std::size_t>(it - sentence.begin())];
}

}  // namespace arseq
