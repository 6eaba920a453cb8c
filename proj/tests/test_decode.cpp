#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "doctest.h"

#include "arseq/decode.hpp"
#include "arseq/lexicon.hpp"
#include "fixtures.hpp"
#include "reference.hpp"

using namespace arseq;
using namespace arseq::fixture;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Vocabulary {pad, sos, eos, unk, a, b, c}; unk is never emitted. The next-token
// distribution depends on the whole prefix, so greedy and beam differ.
struct ToyDecoder {
  using State = std::vector<int>;
  MatrixXd table;  // 7 x 7 logits indexed by last token
  bool allow_eos = true;

  explicit ToyDecoder(std::uint64_t seed, bool eos = true) : allow_eos(eos) {
    Rng rng(seed);
    table = random_matrix(rng, 7, 7, 2.0);
  }

  VectorXd log_probs(const State& prefix) const {
    const int last = prefix.empty() ? kSosId : prefix.back();
    VectorXd logits = table.row(last).transpose();
    logits += 0.3 * static_cast<double>(prefix.size()) * VectorXd::LinSpaced(7, 0, 1);
    VectorXd lp = ref::log_softmax(logits);
    lp[kUnkId] = -kInf;
    if (!allow_eos) lp[kEosId] = -kInf;
    return lp;
  }
  std::pair<State, VectorXd> start() { return {{}, log_probs({})}; }
  std::pair<State, VectorXd> advance(const State& s, int token) {
    State next = s;
    next.push_back(token);
    return {next, log_probs(next)};
  }
};

void enumerate(const ToyDecoder& dec, std::vector<int> prefix, double lp, int max_len, std::vector<Hypothesis>& out) {
  const VectorXd next = dec.log_probs(prefix);
  for (int tok : {kEosId, 4, 5, 6}) {
    if (!std::isfinite(next[tok])) continue;
    Hypothesis h;
    h.tokens = prefix;
    h.log_prob = lp + next[tok];
    if (tok == kEosId) {
      out.push_back(h);
      continue;
    }
    h.tokens.push_back(tok);
    if (static_cast<int>(h.tokens.size()) == max_len) {
      h.forced_end = true;
      out.push_back(h);
    } else {
      enumerate(dec, h.tokens, h.log_prob, max_len, out);
    }
  }
}

std::vector<Hypothesis> brute_force(const ToyDecoder& dec, int max_len) {
  std::vector<Hypothesis> out;
  enumerate(dec, {}, 0.0, max_len, out);
  std::sort(out.begin(), out.end(), detail::hypothesis_before);
  return out;
}

Hypothesis hyp(std::vector<int> tokens, double lp) {
  Hypothesis h;
  h.tokens = std::move(tokens);
  h.log_prob = h.score = h.mmi_score = lp;
  return h;
}

std::vector<std::vector<int>> token_lists(const std::vector<Hypothesis>& hs) {
  std::vector<std::vector<int>> out;
  for (const auto& h : hs) out.push_back(h.tokens);
  return out;
}

}  // namespace

TEST_CASE("beam search matches brute force without EOS") {
  for (std::uint64_t seed : {1, 2, 3}) {
    ToyDecoder dec(seed, false);
    const auto all = brute_force(dec, 2);
    REQUIRE(all.size() == 9);
    for (int b : {3, 5, 9}) {
      BeamOptions opts;
      opts.beam_size = b;
      opts.max_len = 2;
      const auto got = beam_search(dec, opts);
      REQUIRE(got.size() == static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        CHECK(got[i].tokens == all[i].tokens);
        CHECK(std::abs(got[i].log_prob - all[i].log_prob) <= 1e-12);
        CHECK(got[i].forced_end);
      }
    }
  }
}

TEST_CASE("beam search with a real EOS enumerates every sequence when wide enough") {
  for (std::uint64_t seed : {4, 5}) {
    ToyDecoder dec(seed);
    const auto all = brute_force(dec, 3);
    REQUIRE(all.size() == 40);
    BeamOptions opts;
    opts.beam_size = 40;
    opts.max_len = 3;
    const auto got = beam_search(dec, opts);
    REQUIRE(got.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(got[i].tokens == all[i].tokens);
      CHECK(std::abs(got[i].log_prob - all[i].log_prob) <= 1e-12);
      CHECK(got[i].forced_end == all[i].forced_end);
    }
  }
}

TEST_CASE("narrow beams return valid, sorted, distinct hypotheses") {
  ToyDecoder dec(6);
  const auto all = brute_force(dec, 4);
  std::map<std::vector<int>, double> exact;
  for (const auto& h : all) exact[h.tokens] = h.log_prob;
  BeamOptions opts;
  opts.beam_size = 4;
  opts.max_len = 4;
  const auto got = beam_search(dec, opts);
  REQUIRE(got.size() == 4);
  CHECK(got.front().log_prob <= all.front().log_prob + 1e-12);
  for (std::size_t i = 0; i < got.size(); ++i) {
    REQUIRE(exact.count(got[i].tokens) == 1);
    CHECK(std::abs(exact[got[i].tokens] - got[i].log_prob) <= 1e-12);
    if (i) CHECK(got[i - 1].log_prob >= got[i].log_prob);
  }
  std::vector<std::vector<int>> seqs = token_lists(got);
  std::sort(seqs.begin(), seqs.end());
  CHECK(std::adjacent_find(seqs.begin(), seqs.end()) == seqs.end());
}

TEST_CASE("beam size one equals greedy decoding") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    ToyDecoder toy(seed);
    BeamOptions opts;
    opts.beam_size = 1;
    opts.max_len = 6;
    const auto b = beam_search(toy, opts);
    const auto g = greedy_decode(toy, opts);
    REQUIRE(b.size() == 1);
    CHECK(b[0].tokens == g.tokens);
    CHECK(b[0].log_prob == doctest::Approx(g.log_prob).epsilon(1e-14));

    const Seq2Seq model = random_model(small_config(15), seed, 0.6);
    Rng rng(seed);
    const auto input = random_ids(rng, 15, 4);
    ModelDecoder md(model, input);
    opts.max_len = 8;
    const auto mb = beam_search(md, opts);
    const auto mg = greedy_decode(md, opts);
    CHECK(mb[0].tokens == mg.tokens);
    CHECK(mb[0].log_prob == doctest::Approx(mg.log_prob).epsilon(1e-14));
  }
}

TEST_CASE("beam options are validated and banned tokens never appear") {
  ToyDecoder dec(7);
  BeamOptions opts;
  opts.beam_size = 0;
  CHECK_THROWS(beam_search(dec, opts));
  opts.beam_size = 3;
  opts.max_len = 0;
  CHECK_THROWS(beam_search(dec, opts));
  opts.max_len = 4;
  opts.banned = {kPadId, kSosId, 5};
  for (const auto& h : beam_search(dec, opts)) {
    CHECK(std::find(h.tokens.begin(), h.tokens.end(), 5) == h.tokens.end());
    CHECK(std::find(h.tokens.begin(), h.tokens.end(), kEosId) == h.tokens.end());
  }
}

TEST_CASE("gamma and lambda zero model beam search equals the vanilla reference") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ModelConfig cfg = small_config(14);
    cfg.gamma = 0.0;
    cfg.lambda = 0.0;
    const Seq2Seq model = random_model(cfg, seed, 0.5);
    const ref::VanillaSeq2Seq vanilla(model.params());
    Rng rng(seed + 50);
    const auto input = random_ids(rng, 14, 5);
    BeamOptions opts;
    opts.beam_size = 5;
    opts.max_len = 6;
    ModelDecoder md(model, input);
    ref::VanillaDecoder vd(vanilla, input);
    const auto a = beam_search(md, opts);
    const auto b = beam_search(vd, opts);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].tokens == b[i].tokens);
      CHECK(std::abs(a[i].log_prob - b[i].log_prob) <= 1e-12);
      if (!a[i].forced_end) {
        // A completed hypothesis scores exactly its teacher-forced likelihood.
        CHECK(std::abs(-vanilla.sequence_nll({input, a[i].tokens}) - a[i].log_prob) <= 1e-10);
      }
    }
  }
}

TEST_CASE("length normalization divides by tokens plus EOS and reorders stably") {
  std::vector<Hypothesis> hs = {hyp({4, 5, 6}, -3.0), hyp({4}, -2.0), hyp({5}, -2.0), hyp({}, -0.9)};
  length_normalize(hs);
  CHECK(hs[0].score == doctest::Approx(-0.75));
  CHECK(hs[0].tokens == std::vector<int>{4, 5, 6});
  CHECK(hs[1].tokens == std::vector<int>{});
  CHECK(hs[2].tokens == std::vector<int>{4});
  CHECK(hs[3].tokens == std::vector<int>{5});
}

TEST_CASE("MMI rescoring subtracts the weighted anti-LM over the first tokens") {
  std::vector<Hypothesis> hs = {hyp({4, 4}, -1.0), hyp({5, 6}, -1.2), hyp({6}, -1.5)};
  for (auto& h : hs) h.score = h.log_prob;
  // A generic response is likely under the anti-LM and gets penalized.
  const AntiLm lm = [](std::span<const int> toks, int k) {
    double s = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(toks.size(), static_cast<std::size_t>(k)); ++i)
      s += toks[i] == 4 ? -0.1 : -2.0;
    return s;
  };
  auto copy = hs;
  mmi_rescore(copy, lm, 0.0, 5);
  CHECK(token_lists(copy) == token_lists(hs));
  for (const auto& h : copy) CHECK(h.mmi_score == h.score);

  copy = hs;
  mmi_rescore(copy, lm, 0.25, 0);
  CHECK(token_lists(copy) == token_lists(hs));

  copy = hs;
  mmi_rescore(copy, lm, 0.25, 2);
  CHECK(copy[0].tokens == std::vector<int>{5, 6});
  CHECK(copy[0].mmi_score == doctest::Approx(-1.2 + 0.25 * 4.0));
  CHECK(copy[1].tokens == std::vector<int>{4, 4});
  CHECK(copy[1].mmi_score == doctest::Approx(-1.0 + 0.25 * 0.2));
  CHECK(copy[2].tokens == std::vector<int>{6});
  CHECK(copy[2].mmi_score == doctest::Approx(-1.5 + 0.25 * 2.0));

  CHECK_THROWS(mmi_rescore(copy, lm, -1.0, 2));
}

TEST_CASE("anti-LM is the model conditioned on the unknown token") {
  const Seq2Seq model = random_model(small_config(12), 9);
  const std::vector<int> toks = {5, 7, 9, 4};
  const int unk = kUnkId;
  ModelDecoder dec(model, std::span<const int>(&unk, 1));
  auto [state, next] = dec.start();
  double expect = next[5];
  std::tie(state, next) = dec.advance(state, 5);
  expect += next[7];
  CHECK(anti_lm_log_prob(model, toks, 2) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(anti_lm_log_prob(model, toks, 0) == 0.0);
  CHECK(anti_lm_log_prob(model, toks, 10) == doctest::Approx(anti_lm_log_prob(model, toks, 4)).epsilon(1e-14));
}

TEST_CASE("affect scores and the nice example") {
  VadLexicon lex;
  lex.set("nice", Vad(6.95, 3.53, 6.47));
  lex = finalize(lex);
  const Vocabulary vocab = Vocabulary::build({{{"nice", "day"}, {"nice"}}}, 10);
  const VectorXd norms = vocabulary_norms(vocab, lex);
  const int nice = vocab.id("nice"), day = vocab.id("day");
  CHECK(norms[nice] == doctest::Approx(2.4989).epsilon(1e-4));
  CHECK(norms[day] == 0.0);
  for (int id = 0; id < kNumSpecial; ++id) CHECK(norms[id] == 0.0);
  const std::vector<int> one{nice}, two{nice, day};
  CHECK(affect_score(one, norms) == doctest::Approx(2.4989).epsilon(1e-4));
  CHECK(affect_score(two, norms) == doctest::Approx(norms[nice] / 2));
  CHECK(affect_score(std::span<const int>(), norms) == 0.0);
}

TEST_CASE("affect re-ranking is a permutation ordered by affect, then MMI, then log-probability") {
  Rng rng(11);
  VectorXd norms(10);
  for (int i = 0; i < 10; ++i) norms[i] = i < kNumSpecial ? 0.0 : std::floor(rng.uniform(0, 3));
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Hypothesis> hs;
    for (int i = 0; i < 8; ++i) {
      Hypothesis h = hyp(random_ids(rng, 10, 1 + rng.below(3)), -rng.uniform(0, 5));
      h.mmi_score = std::floor(h.log_prob);
      hs.push_back(h);
    }
    auto out = hs;
    affect_rerank(out, norms);
    auto a = token_lists(hs), b = token_lists(out);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    for (std::size_t i = 1; i < out.size(); ++i) {
      const auto key = [](const Hypothesis& h) { return std::make_tuple(h.affect_score, h.mmi_score, h.log_prob); };
      CHECK(key(out[i - 1]) >= key(out[i]));
    }

    // Input order does not change the result.
    auto reversed = hs;
    std::reverse(reversed.begin(), reversed.end());
    affect_rerank(reversed, norms);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(reversed[i].affect_score == out[i].affect_score);
      CHECK(reversed[i].mmi_score == out[i].mmi_score);
      CHECK(reversed[i].log_prob == out[i].log_prob);
    }
  }
}

TEST_CASE("responder: empty messages, truncation, attention rows, determinism") {
  const std::vector<UtterancePair> pairs = {{{"hello", "there", "friend"}, {"hi", "nice", "friend"}},
                                            {{"how", "are", "you"}, {"good", "thanks"}}};
  const Vocabulary vocab = Vocabulary::build(pairs, 100);
  VadLexicon lex;
  lex.set("nice", Vad(6.95, 3.53, 6.47));
  lex.set("good", Vad(7, 4, 6));
  lex = finalize(lex);
  const Seq2Seq model = random_model(small_config(static_cast<int>(vocab.size())), 3, 0.5);
  DecodeOptions opts;
  opts.beam_size = 5;
  opts.max_len = 6;
  opts.max_input_len = 4;
  const Responder responder(model, vocab, vocabulary_norms(vocab, lex), opts);

  CHECK_THROWS_AS(responder.respond(""), EmptyMessageError);
  CHECK_THROWS_AS(responder.respond("!!! ..."), EmptyMessageError);

  const Response r = responder.respond("Hello there, friend! How are you?");
  CHECK(r.truncated);
  CHECK(r.input == Tokens{"hello", "there", "friend", "how"});
  CHECK(r.attention.rows() == static_cast<Eigen::Index>(r.tokens.size()));
  CHECK(r.attention.cols() == 4);
  for (Eigen::Index i = 0; i < r.attention.rows(); ++i) CHECK(std::abs(r.attention.row(i).sum() - 1.0) <= 1e-9);
  CHECK(r.affect_norms.size() == r.tokens.size());
  CHECK(r.ranked.size() <= 5);
  CHECK(r.best.tokens == r.ranked.front().tokens);

  const Response again = responder.respond("Hello there, friend! How are you?");
  CHECK(again.best.tokens == r.best.tokens);
  CHECK(again.best.mmi_score == r.best.mmi_score);

  const Response plain = responder.respond("how are you", std::nullopt, false);
  CHECK_FALSE(plain.truncated);
  for (std::size_t i = 1; i < plain.ranked.size(); ++i) CHECK(plain.ranked[i - 1].mmi_score >= plain.ranked[i].mmi_score);
  const Response wide = responder.respond("how are you", 2, true);
  CHECK(wide.ranked.size() <= 2);
}
