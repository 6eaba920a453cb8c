#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arseq/corpus.hpp"
#include "arseq/lexicon.hpp"
#include "arseq/model.hpp"

namespace arseq {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalReport {
  std::string dataset;
  std::size_t tokens = 0;
  double nll = 0.0;  // mean nats per token
  double perplexity = 1.0;
};

/// Teacher-forced perplexity with the unweighted likelihood.
EvalReport perplexity(const Seq2Seq& model, const std::vector<EncodedPair>& pairs, std::string dataset = {});

/// Report from per-token log-probabilities of the reference tokens.
EvalReport report_from_log_probs(std::span<const double> log_probs, std::string dataset = {});

std::string to_json(const EvalReport& report);

/// Distinct word types whose normalized VAD norm exceeds `threshold`.
std::size_t count_affect_rich(const std::vector<Tokens>& responses, const VadLexicon& lexicon, double threshold);

inline constexpr std::array<double, 3> kAffectThresholds{1.0, 2.0, 3.0};

struct AffectWordReport {
  std::vector<double> thresholds;
  std::vector<std::size_t> counts;
  std::size_t responses = 0;
};

AffectWordReport affect_word_report(const std::vector<Tokens>& responses, const VadLexicon& lexicon,
                                    std::span<const double> thresholds = kAffectThresholds);

std::string to_json(const AffectWordReport& report);

struct AttentionExport {
  Tokens input;   // column labels
  Tokens output;  // row labels
  MatrixXd alignment;  // output.size() x input.size()
};

/// Alignments of a teacher-forced response. With `include_eos` the final
/// row is the step that emits <eos>.
AttentionExport export_attention(const Seq2Seq& model, const Vocabulary& vocab, std::span<const int> input,
                                 std::span<const int> response, bool include_eos = true);

void write_attention_csv(std::ostream& out, const AttentionExport& attention);

struct BetaRow {
  std::string word;
  Eigen::Vector3d beta;
};

/// beta = tanh(W_b x) per word. Words missing from the vocabulary are listed
/// in `missing` and skipped.
std::vector<BetaRow> export_beta(const Seq2Seq& model, const Vocabulary& vocab, const std::vector<std::string>& words,
                                 std::vector<std::string>* missing = nullptr);

void write_beta_csv(std::ostream& out, const std::vector<BetaRow>& rows);

}  // namespace arseq
