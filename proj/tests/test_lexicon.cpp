#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"

#include "arseq/lexicon.hpp"
#include "arseq/random.hpp"
#include "arseq/tokens.hpp"

using namespace arseq;

namespace {

const std::string kData = ARSEQ_TEST_DATA;

LexiconLoad parse(const std::string& text) {
  std::istringstream in(text);
  return parse_lexicon(in);
}

bool near(const Vad& a, const Vad& b, double tol = 1e-12) { return (a - b).cwiseAbs().maxCoeff() <= tol; }

}  // namespace

TEST_CASE("load_lexicon keeps raw values and nice clips to its annotated triple") {
  const LexiconLoad load = load_lexicon(kData + "/lexicon.csv");
  CHECK(load.rows == 8);
  CHECK(load.duplicates == 0);
  CHECK_FALSE(load.lexicon.finalized());
  const VadLexicon lex = finalize(load.lexicon);
  CHECK(near(lex.lookup("nice"), Vad(6.95, 3.53, 6.47)));
  CHECK(near(lex.lookup_normalized("nice"), Vad(1.95, 0.53, 1.47)));
  CHECK(lex.lookup_normalized("nice").norm() == doctest::Approx(2.4989).epsilon(1e-4));
}

TEST_CASE("empty lexicon with header: every lookup is neutral") {
  const VadLexicon lex = finalize(parse("lemma,valence,arousal,dominance\n").lexicon);
  CHECK(lex.size() == 0);
  CHECK(near(lex.lookup("anything"), Vad(5, 3, 5)));
  CHECK(lex.lookup_normalized("anything").isZero(0.0));
}

TEST_CASE("malformed and out-of-range rows report their line") {
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const LexiconError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("lemma,valence,arousal,dominance\nok,5,5,5\nhot,10,5,5\n").find("line 3") != std::string::npos);
  CHECK(message("lemma,valence,arousal,dominance\nshort,5,5\n").find("line 2") != std::string::npos);
  CHECK(message("lemma,valence,arousal,dominance\nx,five,5,5\n").find("line 2") != std::string::npos);
  CHECK(message("word,v,a,d\n").find("header") != std::string::npos);
  CHECK_THROWS_AS(load_lexicon(kData + "/missing.csv"), LexiconError);
}

TEST_CASE("duplicate lemmas: last wins and is counted") {
  const LexiconLoad load = parse("lemma,valence,arousal,dominance\nx,2,2,2\nx,6,6,6\n");
  CHECK(load.duplicates == 1);
  CHECK(near(*load.lexicon.entry("x"), Vad(6, 6, 6)));
}

TEST_CASE("synonym extension averages raw triples of present synonyms") {
  VadLexicon base;
  base.set("s1", Vad(6, 4, 5));
  base.set("s2", Vad(4, 4, 5));
  base.set("solo", Vad(6.2, 5.0, 4.4));
  const SynonymMap syn = {{"both", {"s1", "s2"}}, {"one", {"solo"}}, {"none", {"ghost"}}, {"s1", {"solo"}}};
  ExtensionStats stats;
  const VadLexicon ext = extend_with_synonyms(base, syn, &stats);
  CHECK(near(*ext.entry("both"), Vad(5, 4, 5)));
  CHECK(near(*ext.entry("one"), Vad(6.2, 5.0, 4.4)));
  CHECK_FALSE(ext.contains("none"));
  CHECK(near(*ext.entry("s1"), Vad(6, 4, 5)));  // base entries are never overwritten
  CHECK(ext.is_extended("both"));
  CHECK_FALSE(ext.is_extended("s1"));
  CHECK(stats.added == 2);
  CHECK(stats.skipped == 1);
}

TEST_CASE("synonym extension is idempotent") {
  const VadLexicon base = load_lexicon(kData + "/lexicon.csv").lexicon;
  const SynonymMap syn = load_synonyms(kData + "/synonyms.csv");
  const VadLexicon once = extend_with_synonyms(base, syn);
  const VadLexicon twice = extend_with_synonyms(once, syn);
  CHECK(once.entries() == twice.entries());
  // "dreadful" has no annotated synonym, so "awful" only sees "terrible".
  CHECK(once.contains("pleasant"));
  CHECK_FALSE(once.contains("dreadful"));
  CHECK(near(*once.entry("awful"), *base.entry("terrible")));
  CHECK(near(*once.entry("pleasant"), (*base.entry("nice") + *base.entry("good")) / 2));
}

TEST_CASE("finalize clamps to the clip interval") {
  VadLexicon lex;
  lex.set("a", Vad(8.21, 7.5, 2.1));
  lex.set("b", Vad(6.95, 3.53, 6.47));
  lex.set("c", Vad(1, 9, 5));
  lex.set("d", Vad(7, 7, 7));
  const VadLexicon fin = finalize(lex);
  CHECK(near(fin.lookup("a"), Vad(7, 7, 3)));
  CHECK(near(fin.lookup("b"), Vad(6.95, 3.53, 6.47)));
  CHECK(near(fin.lookup("c"), Vad(3, 7, 5)));
  CHECK(near(fin.lookup_normalized("d"), Vad(2, 4, 2)));
}

TEST_CASE("normalized lookups stay in the normalized box") {
  Rng rng(3);
  VadLexicon lex;
  for (int i = 0; i < 500; ++i)
    lex.set("w" + std::to_string(i), Vad(rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(1, 9)));
  const VadLexicon fin = finalize(lex);
  for (const auto& [lemma, _] : fin.entries()) {
    const Vad v = fin.lookup_normalized(lemma);
    CHECK(v[0] >= -2.0);
    CHECK(v[0] <= 2.0);
    CHECK(v[1] >= 0.0);
    CHECK(v[1] <= 4.0);
    CHECK(v[2] >= -2.0);
    CHECK(v[2] <= 2.0);
  }
}

TEST_CASE("special tokens are neutral and unfinalized lexicons refuse normalized lookups") {
  VadLexicon lex;
  lex.set(std::string(kEosToken), Vad(9, 9, 9));
  CHECK_THROWS_AS(lex.lookup_normalized("x"), std::logic_error);
  const VadLexicon fin = finalize(lex);
  for (auto tok : {kPadToken, kSosToken, kEosToken, kUnkToken}) CHECK(fin.lookup_normalized(std::string(tok)).isZero(0.0));
}

TEST_CASE("lemma map resolves tokens with identity fallback") {
  VadLexicon lex = finalize(load_lexicon(kData + "/lexicon.csv").lexicon);
  lex.set_lemma_map(load_lemma_map(kData + "/lemmas.csv"));
  CHECK(near(lex.lookup("walked"), lex.lookup("walk")));
  CHECK(lex.lemma_of("nice") == "nice");
  CHECK(lex.lookup_normalized("walking").norm() > 0);
}

TEST_CASE("term frequency") {
  const FrequencyTable f = term_frequency({{"a", "a", "b"}});
  CHECK(f.frequency("a") == doctest::Approx(2.0 / 3.0));
  CHECK(f.frequency("b") == doctest::Approx(1.0 / 3.0));
  CHECK(f.frequency("zzz") == 0.0);
  CHECK(term_frequency({{"only"}}).frequency("only") == 1.0);
  CHECK_THROWS(term_frequency({}));
  CHECK_THROWS(term_frequency({{}}));

  Rng rng(9);
  std::vector<std::vector<std::string>> corpus(20);
  for (auto& s : corpus)
    for (int i = 0; i < 7; ++i) s.push_back("t" + std::to_string(rng.below(30)));
  const FrequencyTable g = term_frequency(corpus);
  double total = 0;
  for (const auto& [_, p] : g.p) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-9);
}

TEST_CASE("term importance modes") {
  const FrequencyTable f = term_frequency({{"good", "day", "day", "x"}});
  const std::vector<std::string> sentence{"good", "day"};
  CHECK(term_importance("good", ImportanceMode::uniform, f, sentence) == 1.0);

  const double freqs[] = {0.00143};
  CHECK(importance_weights(freqs, ImportanceMode::global)[0] == doctest::Approx(0.4115).epsilon(1e-4));

  const double equal[] = {0.01, 0.01, 0.01, 0.01, 0.01};
  for (double w : importance_weights(equal, ImportanceMode::local)) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS(importance_weights(std::span<const double>(), ImportanceMode::local));
  CHECK_THROWS(term_importance("good", ImportanceMode::local, f, {}));
}

TEST_CASE("global importance is decreasing in frequency with gi(0) = 1") {
  double prev = 2.0;
  for (double p : {0.0, 1e-6, 1e-4, 1e-3, 0.01, 0.1, 0.5, 1.0}) {
    const double x[] = {p};
    const double gi = importance_weights(x, ImportanceMode::global)[0];
    CHECK(gi > 0.0);
    CHECK(gi <= 1.0);
    CHECK(gi < prev);
    if (p == 0.0) CHECK(gi == 1.0);
    prev = gi;
  }
}

TEST_CASE("local importance sums to one over random sentences") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> freqs(1 + rng.below(20));
    for (auto& p : freqs) p = rng.uniform() < 0.1 ? 0.0 : rng.uniform() * 0.2;
    const auto w = importance_weights(freqs, ImportanceMode::local);
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-9);
    for (double x : w) CHECK(x >= 0.0);
  }
}

TEST_CASE("importance mode names") {
  CHECK(parse_importance_mode("ui") == ImportanceMode::uniform);
  CHECK(parse_importance_mode("gi") == ImportanceMode::global);
  CHECK(parse_importance_mode("li") == ImportanceMode::local);
  CHECK(to_string(ImportanceMode::local) == "li");
  CHECK_THROWS(parse_importance_mode("xx"));
}

TEST_CASE("saved lexicons load back identically") {
  const VadLexicon lex = finalize(load_lexicon(kData + "/lexicon.csv").lexicon);
  const auto path = std::filesystem::temp_directory_path() / "arseq_lexicon_roundtrip.csv";
  save_lexicon(lex, path);
  const VadLexicon back = load_lexicon(path).lexicon;
  CHECK(back.entries() == lex.entries());
  std::filesystem::remove(path);
}
