#include "arseq/decode.hpp"

#include <algorithm>

#include "arseq/eval.hpp"
#include "arseq/tokens.hpp"

namespace arseq {

ModelDecoder::ModelDecoder(const Seq2Seq& model, std::span<const int> input)
    : forward_(tape_, model), encoded_(forward_.encode(input)) {}

std::pair<ModelDecoder::State, VectorXd> ModelDecoder::step(int prev, const State& state) {
  DecodeStep s = forward_.decode_step(prev, state, encoded_);
  VectorXd logp = log_softmax(s.logits).value().col(0);
  return {std::move(s.state), std::move(logp)};
}

std::pair<ModelDecoder::State, VectorXd> ModelDecoder::start() { return step(kSosId, encoded_.initial); }

std::pair<ModelDecoder::State, VectorXd> ModelDecoder::advance(const State& state, int token) {
  return step(token, state);
}

double anti_lm_log_prob(const Seq2Seq& model, std::span<const int> tokens, int first_k) {
  const std::size_t k = std::min(tokens.size(), static_cast<std::size_t>(std::max(first_k, 0)));
  if (k == 0) return 0.0;
  const int unk = kUnkId;
  ModelDecoder dec(model, std::span<const int>(&unk, 1));
  auto [state, next] = dec.start();
  double total = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    total += next[tokens[t]];
    if (t + 1 < k) std::tie(state, next) = dec.advance(state, tokens[t]);
  }
  return total;
}

void length_normalize(std::vector<Hypothesis>& hyps) {
  for (auto& h : hyps) h.score = h.log_prob / static_cast<double>(h.tokens.size() + 1);
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
}

void mmi_rescore(std::vector<Hypothesis>& hyps, const AntiLm& anti_lm, double weight, int first_k) {
  if (weight < 0) throw std::invalid_argument("mmi_rescore: weight must be nonnegative");
  // A zero penalty leaves the incoming order alone.
  if (weight == 0.0 || first_k <= 0) {
    for (auto& h : hyps) h.mmi_score = h.score;
    return;
  }
  for (auto& h : hyps) h.mmi_score = h.score - weight * anti_lm(h.tokens, first_k);
  std::stable_sort(hyps.begin(), hyps.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.mmi_score > b.mmi_score; });
}

double affect_score(std::span<const int> tokens, const VectorXd& id_norms) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int id : tokens) {
    if (id == kSosId || id == kEosId || id == kPadId) continue;
    sum += id_norms[id];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void affect_rerank(std::vector<Hypothesis>& hyps, const VectorXd& id_norms) {
  for (auto& h : hyps) h.affect_score = affect_score(h.tokens, id_norms);
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.affect_score != b.affect_score) return a.affect_score > b.affect_score;
    if (a.mmi_score != b.mmi_score) return a.mmi_score > b.mmi_score;
    return a.log_prob > b.log_prob;
  });
}

std::string Response::text() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Responder::Responder(const Seq2Seq& model, const Vocabulary& vocab, VectorXd id_norms, DecodeOptions options)
    : model_(&model), vocab_(&vocab), id_norms_(std::move(id_norms)), options_(options) {
  if (id_norms_.size() != model.config().vocab_size)
    throw std::invalid_argument("Responder: affect norms do not match the vocabulary");
  if (static_cast<std::size_t>(model.config().vocab_size) != vocab.size())
    throw std::invalid_argument("Responder: vocabulary does not match the model");
}

Response Responder::respond(std::string_view message, std::optional<int> beam_size, std::optional<bool> rerank) const {
  return respond_tokens(preprocess(message), beam_size, rerank);
}

Response Responder::respond_tokens(Tokens tokens, std::optional<int> beam_size, std::optional<bool> rerank) const {
  if (tokens.empty()) throw EmptyMessageError("message is empty after preprocessing");
  Response r;
  const auto limit = static_cast<std::size_t>(options_.max_input_len);
  if (tokens.size() > limit) {
    tokens.resize(limit);
    r.truncated = true;
  }
  r.input = std::move(tokens);
  r.input_ids = vocab_->encode(r.input);

  BeamOptions beam;
  beam.beam_size = beam_size.value_or(options_.beam_size);
  beam.max_len = options_.max_len;
  ModelDecoder dec(*model_, r.input_ids);
  r.ranked = beam_search(dec, beam);
  if (r.ranked.empty()) throw std::runtime_error("beam search produced no hypotheses");

  length_normalize(r.ranked);
  const Seq2Seq& model = *model_;
  mmi_rescore(r.ranked, [&](std::span<const int> toks, int k) { return anti_lm_log_prob(model, toks, k); },
              options_.mmi_weight, options_.mmi_first_k);
  if (rerank.value_or(options_.rerank)) {
    affect_rerank(r.ranked, id_norms_);
  } else {
    for (auto& h : r.ranked) h.affect_score = affect_score(h.tokens, id_norms_);
  }

  r.best = r.ranked.front();
  r.tokens = vocab_->decode(r.best.tokens);
  for (int id : r.best.tokens) r.affect_norms.push_back(id_norms_[id]);
  r.attention = export_attention(model, *vocab_, r.input_ids, r.best.tokens, false).alignment;
  return r;
}

VectorXd vocabulary_norms(const Vocabulary& vocab, const VadLexicon& lexicon) {
  VectorXd norms = VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t i = kNumSpecial; i < vocab.size(); ++i)
    norms[static_cast<Eigen::Index>(i)] = lexicon.lookup_normalized(vocab.token(static_cast<int>(i))).norm();
  return norms;
}

}  // namespace arseq
