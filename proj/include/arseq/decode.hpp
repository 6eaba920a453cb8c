#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "arseq/beam.hpp"
#include "arseq/corpus.hpp"
#include "arseq/model.hpp"

namespace arseq {

/// Step-wise decoder over a frozen model for one input sentence. Owns its
/// tape, so concurrent decoders may share one model.
class ModelDecoder {
 public:
  using State = DecoderState;

  ModelDecoder(const Seq2Seq& model, std::span<const int> input);
  ModelDecoder(const ModelDecoder&) = delete;
  ModelDecoder& operator=(const ModelDecoder&) = delete;

  std::pair<State, VectorXd> start();
  std::pair<State, VectorXd> advance(const State& state, int token);

  const Encoded& encoded() const { return encoded_; }

 private:
  std::pair<State, VectorXd> step(int prev, const State& state);

  TapeD tape_;
  ForwardPass forward_;
  Encoded encoded_;
};

/// Sum of log p(y_t | <unk>) over the first `first_k` tokens; the model fed a
/// single unknown token stands in for a language model.
double anti_lm_log_prob(const Seq2Seq& model, std::span<const int> tokens, int first_k);

/// Sets score = log_prob / (tokens + 1) and stably reorders by it. The +1
/// counts the emitted <eos>.
void length_normalize(std::vector<Hypothesis>& hyps);

using AntiLm = std::function<double(std::span<const int> tokens, int first_k)>;

/// mmi_score = score - weight * anti_lm(first_k); stable reorder by it.
void mmi_rescore(std::vector<Hypothesis>& hyps, const AntiLm& anti_lm, double weight, int first_k);

/// Mean per-token VAD norm of the content tokens; 0 for an empty response.
double affect_score(std::span<const int> tokens, const VectorXd& id_norms);

/// Stable sort by affect score, then MMI score, then log-probability, all descending.
void affect_rerank(std::vector<Hypothesis>& hyps, const VectorXd& id_norms);

struct DecodeOptions {
  int beam_size = 20;
  int max_len = 20;
  int max_input_len = 20;
  double mmi_weight = 0.25;
  int mmi_first_k = 5;
  bool rerank = true;
};

class EmptyMessageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Response {
  Tokens input;             // after preprocessing and truncation
  bool truncated = false;
  std::vector<int> input_ids;
  std::vector<Hypothesis> ranked;
  Hypothesis best;
  Tokens tokens;
  std::vector<double> affect_norms;  // per response token
  MatrixXd attention;                // tokens x input
  std::string text() const;
};

/// preprocess -> encode -> beam -> length normalization -> MMI -> affect re-rank.
class Responder {
 public:
  Responder(const Seq2Seq& model, const Vocabulary& vocab, VectorXd id_norms, DecodeOptions options);

  Response respond(std::string_view message, std::optional<int> beam_size = std::nullopt,
                   std::optional<bool> rerank = std::nullopt) const;
  Response respond_tokens(Tokens tokens, std::optional<int> beam_size = std::nullopt,
                          std::optional<bool> rerank = std::nullopt) const;

  const DecodeOptions& options() const { return options_; }
  const VectorXd& id_norms() const { return id_norms_; }

 private:
  const Seq2Seq* model_;
  const Vocabulary* vocab_;
  VectorXd id_norms_;
  DecodeOptions options_;
};

/// Per-id normalized VAD norms from a lexicon; special tokens are 0.
VectorXd vocabulary_norms(const Vocabulary& vocab, const VadLexicon& lexicon);

}  // namespace arseq
