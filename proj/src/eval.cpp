#include "arseq/eval.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include "json.hpp"

#include "arseq/tokens.hpp"

namespace arseq {

EvalReport perplexity(const Seq2Seq& model, const std::vector<EncodedPair>& pairs, std::string dataset) {
  if (pairs.empty()) throw EvalError("perplexity: empty dataset");
  const VectorXd ones = VectorXd::Ones(model.config().vocab_size);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : pairs) {
    TapeD tape;
    ForwardPass fp(tape, model);
    const SequenceLoss sl = fp.sequence_loss(pair, ones);
    nll += sl.nll;
    tokens += sl.tokens;
  }
  EvalReport r;
  r.dataset = std::move(dataset);
  r.tokens = tokens;
  r.nll = nll / static_cast<double>(tokens);
  r.perplexity = std::exp(r.nll);
  return r;
}

EvalReport report_from_log_probs(std::span<const double> log_probs, std::string dataset) {
  if (log_probs.empty()) throw EvalError("perplexity: empty dataset");
  double nll = 0.0;
  for (double lp : log_probs) nll -= lp;
  EvalReport r;
  r.dataset = std::move(dataset);
  r.tokens = log_probs.size();
  r.nll = nll / static_cast<double>(log_probs.size());
  r.perplexity = std::exp(r.nll);
  return r;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["dataset"] = report.dataset;
  j["tokens"] = report.tokens;
  j["nll"] = report.nll;
  j["perplexity"] = report.perplexity;
  return j.dump();
}

std::size_t count_affect_rich(const std::vector<Tokens>& responses, const VadLexicon& lexicon, double threshold) {
  if (threshold < 0) throw std::invalid_argument("count_affect_rich: threshold must be nonnegative");
  std::set<std::string> types;
  for (const auto& response : responses)
    for (const auto& word : response)
      if (!is_special_token(word) && lexicon.lookup_normalized(word).norm() > threshold) types.insert(word);
  return types.size();
}

AffectWordReport affect_word_report(const std::vector<Tokens>& responses, const VadLexicon& lexicon,
                                    std::span<const double> thresholds) {
  AffectWordReport r;
  r.responses = responses.size();
  for (double t : thresholds) {
    r.thresholds.push_back(t);
    r.counts.push_back(count_affect_rich(responses, lexicon, t));
  }
  return r;
}

std::string to_json(const AffectWordReport& report) {
  nlohmann::ordered_json j;
  j["responses"] = report.responses;
  j["thresholds"] = report.thresholds;
  j["counts"] = report.counts;
  return j.dump();
}

AttentionExport export_attention(const Seq2Seq& model, const Vocabulary& vocab, std::span<const int> input,
                                 std::span<const int> response, bool include_eos) {
  TapeD tape;
  ForwardPass fp(tape, model);
  const Encoded enc = fp.encode(input);
  const std::size_t rows = response.size() + (include_eos ? 1 : 0);

  AttentionExport out;
  out.input = vocab.decode(std::vector<int>(input.begin(), input.end()));
  out.alignment.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(input.size()));
  DecoderState state = enc.initial;
  int prev = kSosId;
  for (std::size_t t = 0; t < rows; ++t) {
    DecodeStep step = fp.decode_step(prev, state, enc);
    out.alignment.row(static_cast<Eigen::Index>(t)) = step.alignment.value().col(0).transpose();
    const int emitted = t < response.size() ? response[t] : kEosId;
    out.output.push_back(vocab.token(emitted));
    state = std::move(step.state);
    prev = emitted;
  }
  return out;
}

namespace {

// Quote a CSV field when it needs it.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_attention_csv(std::ostream& out, const AttentionExport& attention) {
  out << std::setprecision(17) << "output";
  for (const auto& tok : attention.input) out << ',' << csv_field(tok);
  out << '\n';
  for (Eigen::Index r = 0; r < attention.alignment.rows(); ++r) {
    out << csv_field(attention.output[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < attention.alignment.cols(); ++c) out << ',' << attention.alignment(r, c);
    out << '\n';
  }
}

std::vector<BetaRow> export_beta(const Seq2Seq& model, const Vocabulary& vocab, const std::vector<std::string>& words,
                                 std::vector<std::string>* missing) {
  TapeD tape;
  ForwardPass fp(tape, model);
  std::vector<BetaRow> rows;
  for (const auto& w : words) {
    if (!vocab.contains(w) || is_special_token(w)) {
      if (missing) missing->push_back(w);
      continue;
    }
    rows.push_back({w, fp.modifier_scale(vocab.id(w)).value().col(0)});
  }
  return rows;
}

void write_beta_csv(std::ostream& out, const std::vector<BetaRow>& rows) {
  out << std::setprecision(17) << "word,valence,arousal,dominance\n";
  for (const auto& r : rows) out << csv_field(r.word) << ',' << r.beta[0] << ',' << r.beta[1] << ',' << r.beta[2] << '\n';
}

}  // namespace arseq
