#pragma once

// Attention Seq2Seq with affective embedding and affect-biased attention.
//
//   e(x)    = [x; lambda * vad(x)]                         word + scaled VAD
//   encoder = bidirectional LSTM, directions concatenated and projected to h
//   eta_t   = gamma * || mu_t (1 + beta_t) * vad(x_t) ||^2, beta_t = tanh(W_b x_{t-1})
//   e_t'_t  = h_t . s_t' + eta_t,  alpha = softmax(e),  c = sum_t alpha_t h_t
//   out     = W_o tanh(W_c [c; s] + b_c) + b_o
//
// The decoder is a unidirectional LSTM stack started from the projected final
// encoder states.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arseq/corpus.hpp"
#include "arseq/lexicon.hpp"
#include "arseq/tensor.hpp"

namespace arseq {

using TapeD = Tape<double>;
using VarD = Var<double>;
using ParameterD = Parameter<double>;

struct ModelConfig {
  int vocab_size = 0;
  int word_dim = 64;
  int hidden_dim = 64;
  int layers = 1;
  double lambda = 0.1;
  double gamma = 5.0;
  ImportanceMode importance = ImportanceMode::local;
  ImportanceParams importance_params;

  int embedding_dim() const { return word_dim + 3; }
  void validate() const;
};

/// Affective attention coefficient used when none is configured.
double default_gamma(ImportanceMode mode);

/// Per-vocabulary-id affect data: normalized VAD rows and corpus frequencies.
struct AffectTables {
  MatrixXd vad;        // |V| x 3
  VectorXd frequency;  // |V|

  static AffectTables neutral(int vocab_size);
  static AffectTables build(const Vocabulary& vocab, const VadLexicon& lexicon,
                            const std::vector<EncodedPair>& training_pairs);

  double vad_norm(int id) const { return vad.row(id).norm(); }
};

/// Term frequency of every vocabulary id over both sides of the training pairs.
VectorXd id_frequencies(int vocab_size, const std::vector<EncodedPair>& pairs);

// LSTM gate rows are stacked as [input; forget; cell; output].
struct LstmParams {
  ParameterD w_x;
  ParameterD w_h;
  ParameterD bias;
};

struct EncoderLayerParams {
  LstmParams fwd;
  LstmParams bwd;
  ParameterD proj;  // h x 2h
};

struct ModelParams {
  ParameterD embedding;  // |V| x m
  std::vector<EncoderLayerParams> encoder;
  std::vector<LstmParams> decoder;
  ParameterD w_c;  // h x 2h
  ParameterD b_c;
  ParameterD w_o;  // |V| x h
  ParameterD b_o;
  ParameterD w_b;  // 3 x m

  static ModelParams create(const ModelConfig& config);

  std::vector<ParameterD*> all();
  std::vector<const ParameterD*> all() const;
  ParameterD* find(const std::string& name);
  const ParameterD* find(const std::string& name) const;
  std::size_t count() const;
  void zero_grad();
};

/// Deterministic uniform(-range, range) fill in parameter order.
void initialize_uniform(ModelParams& params, std::uint64_t seed, double range);

class Seq2Seq {
 public:
  Seq2Seq(ModelConfig config, AffectTables tables);

  void initialize(std::uint64_t seed, double range = 0.08) { initialize_uniform(params_, seed, range); }

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const AffectTables& tables() const { return tables_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

 private:
  ModelConfig config_;
  AffectTables tables_;
  ModelParams params_;
};

struct LstmState {
  VarD h;
  VarD c;
};

struct DecoderState {
  std::vector<LstmState> layers;
  const VarD& top() const { return layers.back().h; }
};

struct Encoded {
  std::vector<int> tokens;
  VarD memory;    // h x T, projected encoder states as columns
  VarD memory_t;  // T x h
  VarD eta;       // T x 1, affect bias per position
  std::vector<double> importance;
  DecoderState initial;
};

struct Attention {
  VarD context;    // h x 1
  VarD alignment;  // T x 1
};

struct DecodeStep {
  DecoderState state;
  VarD attentional;
  VarD logits;
  VarD alignment;
};

struct SequenceLoss {
  VarD loss;                 // sum over steps of weight * -log p(target)
  double nll = 0.0;          // unweighted sum, for reporting
  std::size_t tokens = 0;    // decoding steps incl. EOS
};

/// Binds a model to a tape. A mutable model records gradients into its
/// parameters; a const model is read in place and never differentiated.
class ForwardPass {
 public:
  ForwardPass(TapeD& tape, Seq2Seq& model);
  ForwardPass(TapeD& tape, const Seq2Seq& model);

  TapeD& tape() const { return *tape_; }
  const Seq2Seq& model() const { return *model_; }

  VarD word_vector(int token) const;
  /// Affective embedding [x; lambda * vad(x)], dimension m + 3.
  VarD embed(int token) const;
  /// beta = tanh(W_b x_prev); zero when there is no predecessor (prev < 0).
  VarD modifier_scale(int prev_token) const;
  /// Nonnegative attention bias of `token` given its predecessor.
  VarD affect_bias(int token, int prev_token, double importance) const;

  LstmState lstm_step(std::size_t layer_kind, std::size_t layer, VarD x, const LstmState& prev) const;

  Encoded encode(std::span<const int> tokens) const;
  Attention attend(const VarD& decoder_state, const Encoded& encoded) const;
  DecodeStep decode_step(int prev_token, const DecoderState& state, const Encoded& encoded) const;

  /// Teacher-forced loss of a response: inputs are <sos> y1..yn, targets y1..yn <eos>.
  SequenceLoss sequence_loss(const EncodedPair& pair, const VectorXd& weights) const;

  static constexpr std::size_t kEncoderFwd = 0;
  static constexpr std::size_t kEncoderBwd = 1;
  static constexpr std::size_t kDecoder = 2;

 private:
  struct BoundLstm {
    VarD w_x, w_h, bias;
  };
  struct BoundEncoderLayer {
    BoundLstm fwd, bwd;
    VarD proj;
  };

  template <typename ModelRef>
  void bind(ModelRef& model, bool trainable);
  const BoundLstm& lstm(std::size_t kind, std::size_t layer) const;

  TapeD* tape_;
  const Seq2Seq* model_;
  VarD embedding_, w_c_, b_c_, w_o_, b_o_, w_b_;
  std::vector<BoundEncoderLayer> encoder_;
  std::vector<BoundLstm> decoder_;
};

}  // namespace arseq
