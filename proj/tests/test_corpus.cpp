#include <filesystem>

#include "doctest.h"

#include "arseq/corpus.hpp"
#include "arseq/random.hpp"
#include "arseq/tokens.hpp"

using namespace arseq;

namespace {

const std::string kData = ARSEQ_TEST_DATA;

Tokens toks(std::initializer_list<const char*> xs) { return Tokens(xs.begin(), xs.end()); }

UtterancePair pair_of(std::size_t in, std::size_t out) { return {Tokens(in, "w"), Tokens(out, "w")}; }

}  // namespace

TEST_CASE("preprocess: contractions, sound cues, punctuation") {
  CHECK(preprocess("isn't") == toks({"is", "not"}));
  CHECK(preprocess("BANG!!! 42").empty());
  CHECK(preprocess("Hello.") == toks({"hello"}));
  CHECK(preprocess("I can't, won't... you're") == toks({"i", "can", "not", "will", "not", "you", "are"}));
  CHECK(preprocess("(sighs) OK, that's fine [music]") == toks({"ok", "that", "is", "fine"}));
  CHECK(preprocess("I’m here") == toks({"i", "am", "here"}));
  CHECK(preprocess("the dog's bone") == toks({"the", "dog", "bone"}));
  CHECK(preprocess("   ").empty());
}

TEST_CASE("filter_pairs drops empty or overlong sides") {
  const auto kept = filter_pairs({pair_of(21, 3), pair_of(3, 0), pair_of(5, 7), pair_of(20, 20)}, 20);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].input.size() == 5);
  CHECK(kept[1].input.size() == 20);
}

TEST_CASE("filter_pairs never grows and is idempotent") {
  Rng rng(4);
  std::vector<UtterancePair> pairs;
  for (int i = 0; i < 200; ++i) pairs.push_back(pair_of(rng.below(25), rng.below(25)));
  const auto once = filter_pairs(pairs, 20);
  const auto twice = filter_pairs(once, 20);
  CHECK(once.size() <= pairs.size());
  CHECK(twice.size() == once.size());
}

TEST_CASE("vocabulary keeps the most frequent tokens after the reserved ids") {
  const std::vector<UtterancePair> pairs = {{toks({"a", "a", "b"}), toks({"a", "b", "c"})}};
  const Vocabulary v = Vocabulary::build(pairs, 6);
  REQUIRE(v.size() == 6);
  CHECK(v.token(kPadId) == kPadToken);
  CHECK(v.token(kSosId) == kSosToken);
  CHECK(v.token(kEosId) == kEosToken);
  CHECK(v.token(kUnkId) == kUnkToken);
  CHECK(v.token(4) == "a");
  CHECK(v.token(5) == "b");
  CHECK(v.id("c") == kUnkId);
  CHECK(v.coverage().value() == doctest::Approx(5.0 / 6.0));
  CHECK(Vocabulary::build(pairs, 100).coverage().value() == 1.0);
  CHECK_THROWS(Vocabulary::build(pairs, 4));
  CHECK_THROWS(Vocabulary::build({}, 10));
}

TEST_CASE("vocabulary ties break lexicographically") {
  const Vocabulary v = Vocabulary::build({{toks({"b", "a"}), toks({"b", "a"})}}, 5);
  REQUIRE(v.size() == 5);
  CHECK(v.token(4) == "a");
}

TEST_CASE("encode then decode is the identity on in-vocabulary tokens") {
  const auto pairs = load_pairs(kData + "/pairs.tsv");
  const Vocabulary v = Vocabulary::build(pairs, 1000);
  for (const auto& p : pairs) {
    CHECK(v.decode(v.encode(p.input)) == p.input);
    CHECK(v.decode(v.encode(p.response)) == p.response);
  }
}

TEST_CASE("pair files: malformed lines are skipped, empty sides filtered") {
  std::size_t skipped = 0;
  const auto raw = read_pair_file(kData + "/pairs.tsv", &skipped);
  CHECK(raw.size() == 3);
  CHECK(skipped == 1);
  const auto pairs = load_pairs(kData + "/pairs.tsv");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].input == toks({"how", "are", "you"}));
  CHECK(pairs[1].response == toks({"yes", "it", "is", "very", "nice"}));
  CHECK_THROWS(read_pair_file(kData + "/missing.tsv"));
}

TEST_CASE("vocabulary and pairs round-trip through files") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto pairs = load_pairs(kData + "/pairs.tsv");
  const Vocabulary v = Vocabulary::build(pairs, 1000);
  v.save(dir / "arseq_vocab.tsv");
  const Vocabulary back = Vocabulary::load(dir / "arseq_vocab.tsv");
  CHECK(back.tokens() == v.tokens());
  CHECK(back.counts() == v.counts());

  save_pairs(pairs, dir / "arseq_pairs.tsv");
  const auto again = load_pairs(dir / "arseq_pairs.tsv");
  REQUIRE(again.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(again[i].input == pairs[i].input);
    CHECK(again[i].response == pairs[i].response);
  }
  std::filesystem::remove(dir / "arseq_vocab.tsv");
  std::filesystem::remove(dir / "arseq_pairs.tsv");
}

TEST_CASE("from_entries requires the reserved prefix") {
  CHECK_THROWS(Vocabulary::from_entries({{"a", 1}}));
  const Vocabulary v = Vocabulary::from_entries(
      {{"<pad>", 0}, {"<sos>", 0}, {"<eos>", 0}, {"<unk>", 0}, {"hi", 3}});
  CHECK(v.id("hi") == 4);
  CHECK(v.count(4) == 3);
}
