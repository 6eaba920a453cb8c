#include "arseq/model.hpp"

#include <stdexcept>

#include "arseq/random.hpp"
#include "arseq/tokens.hpp"

namespace arseq {

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecial) throw std::invalid_argument("model: vocab_size must exceed the reserved tokens");
  if (word_dim <= 0 || hidden_dim <= 0 || layers <= 0)
    throw std::invalid_argument("model: word_dim, hidden_dim and layers must be positive");
  if (lambda < 0 || gamma < 0) throw std::invalid_argument("model: lambda and gamma must be nonnegative");
  if (importance_params.a <= 0 || importance_params.epsilon <= 0)
    throw std::invalid_argument("model: importance constants a and epsilon must be positive");
}

double default_gamma(ImportanceMode mode) {
  switch (mode) {
    case ImportanceMode::uniform: return 0.5;
    case ImportanceMode::global: return 1.0;
    case ImportanceMode::local: return 5.0;
  }
  return 0.5;
}

AffectTables AffectTables::neutral(int vocab_size) {
  return {MatrixXd::Zero(vocab_size, 3), VectorXd::Zero(vocab_size)};
}

VectorXd id_frequencies(int vocab_size, const std::vector<EncodedPair>& pairs) {
  VectorXd counts = VectorXd::Zero(vocab_size);
  double total = 0;
  for (const auto& p : pairs) {
    for (const auto* side : {&p.input, &p.response}) {
      for (int id : *side) counts[id] += 1;
      total += static_cast<double>(side->size());
    }
  }
  if (total > 0) counts /= total;
  return counts;
}

AffectTables AffectTables::build(const Vocabulary& vocab, const VadLexicon& lexicon,
                                 const std::vector<EncodedPair>& training_pairs) {
  const int n = static_cast<int>(vocab.size());
  AffectTables t = neutral(n);
  for (int i = 0; i < n; ++i) t.vad.row(i) = lexicon.lookup_normalized(vocab.token(i)).transpose();
  t.frequency = id_frequencies(n, training_pairs);
  return t;
}

namespace {

LstmParams make_lstm(const std::string& prefix, int input, int hidden) {
  return {ParameterD(prefix + ".w_x", 4 * hidden, input), ParameterD(prefix + ".w_h", 4 * hidden, hidden),
          ParameterD(prefix + ".bias", 4 * hidden, 1)};
}

template <typename P, typename Self>
std::vector<P*> collect(Self& s) {
  std::vector<P*> out{&s.embedding};
  auto add_lstm = [&out](auto& l) {
    out.push_back(&l.w_x);
    out.push_back(&l.w_h);
    out.push_back(&l.bias);
  };
  for (auto& layer : s.encoder) {
    add_lstm(layer.fwd);
    add_lstm(layer.bwd);
    out.push_back(&layer.proj);
  }
  for (auto& layer : s.decoder) add_lstm(layer);
  for (P* p : {&s.w_c, &s.b_c, &s.w_o, &s.b_o, &s.w_b}) out.push_back(p);
  return out;
}

}  // namespace

ModelParams ModelParams::create(const ModelConfig& c) {
  c.validate();
  const int h = c.hidden_dim;
  ModelParams p;
  p.embedding = ParameterD("embedding", c.vocab_size, c.word_dim);
  for (int l = 0; l < c.layers; ++l) {
    const int in = l == 0 ? c.embedding_dim() : 2 * h;
    const std::string pre = "encoder." + std::to_string(l);
    p.encoder.push_back({make_lstm(pre + ".fwd", in, h), make_lstm(pre + ".bwd", in, h),
                         ParameterD(pre + ".proj", h, 2 * h)});
  }
  for (int l = 0; l < c.layers; ++l)
    p.decoder.push_back(make_lstm("decoder." + std::to_string(l), l == 0 ? c.embedding_dim() : h, h));
  p.w_c = ParameterD("attention.w_c", h, 2 * h);
  p.b_c = ParameterD("attention.b_c", h, 1);
  p.w_o = ParameterD("output.w_o", c.vocab_size, h);
  p.b_o = ParameterD("output.b_o", c.vocab_size, 1);
  p.w_b = ParameterD("affect.w_b", 3, c.word_dim);
  return p;
}

std::vector<ParameterD*> ModelParams::all() { return collect<ParameterD>(*this); }
std::vector<const ParameterD*> ModelParams::all() const { return collect<const ParameterD>(*this); }

ParameterD* ModelParams::find(const std::string& name) {
  for (auto* p : all())
    if (p->name == name) return p;
  return nullptr;
}

const ParameterD* ModelParams::find(const std::string& name) const {
  for (const auto* p : all())
    if (p->name == name) return p;
  return nullptr;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += static_cast<std::size_t>(p->size());
  return n;
}

void ModelParams::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

void initialize_uniform(ModelParams& params, std::uint64_t seed, double range) {
  Rng rng(seed);
  for (auto* p : params.all())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) p->value(r, c) = rng.uniform(-range, range);
}

Seq2Seq::Seq2Seq(ModelConfig config, AffectTables tables)
    : config_(config), tables_(std::move(tables)), params_(ModelParams::create(config)) {
  if (tables_.vad.rows() != config_.vocab_size || tables_.vad.cols() != 3 ||
      tables_.frequency.size() != config_.vocab_size)
    throw std::invalid_argument("Seq2Seq: affect tables do not match the vocabulary size");
}

// ---------------------------------------------------------------------------

ForwardPass::ForwardPass(TapeD& tape, Seq2Seq& model) : tape_(&tape), model_(&model) { bind(model, true); }

ForwardPass::ForwardPass(TapeD& tape, const Seq2Seq& model) : tape_(&tape), model_(&model) { bind(model, false); }

template <typename ModelRef>
void ForwardPass::bind(ModelRef& model, bool trainable) {
  auto& ps = model.params();
  auto b = [this, trainable](auto& p) -> VarD {
    if constexpr (std::is_const_v<std::remove_reference_t<decltype(p)>>) {
      return tape_->frozen(p.value);
    } else {
      return trainable ? tape_->parameter(p) : tape_->frozen(p.value);
    }
  };
  auto bl = [&b](auto& l) { return BoundLstm{b(l.w_x), b(l.w_h), b(l.bias)}; };
  embedding_ = b(ps.embedding);
  for (auto& layer : ps.encoder) encoder_.push_back({bl(layer.fwd), bl(layer.bwd), b(layer.proj)});
  for (auto& layer : ps.decoder) decoder_.push_back(bl(layer));
  w_c_ = b(ps.w_c);
  b_c_ = b(ps.b_c);
  w_o_ = b(ps.w_o);
  b_o_ = b(ps.b_o);
  w_b_ = b(ps.w_b);
}

const ForwardPass::BoundLstm& ForwardPass::lstm(std::size_t kind, std::size_t layer) const {
  switch (kind) {
    case kEncoderFwd: return encoder_.at(layer).fwd;
    case kEncoderBwd: return encoder_.at(layer).bwd;
    default: return decoder_.at(layer);
  }
}

VarD ForwardPass::word_vector(int token) const {
  if (token < 0 || token >= model_->config().vocab_size)
    throw std::out_of_range("token id " + std::to_string(token) + " outside the vocabulary");
  return gather_row(embedding_, token);
}

VarD ForwardPass::embed(int token) const {
  const VarD word = word_vector(token);
  const MatrixXd suffix = model_->config().lambda * model_->tables().vad.row(token).transpose();
  return concat(word, tape_->constant(suffix));
}

VarD ForwardPass::modifier_scale(int prev_token) const {
  if (prev_token < 0) return tape_->constant(MatrixXd::Zero(3, 1));
  return tanh(matmul(w_b_, word_vector(prev_token)));
}

VarD ForwardPass::affect_bias(int token, int prev_token, double importance) const {
  const double gamma = model_->config().gamma;
  const Vad vad = model_->tables().vad.row(token).transpose();
  if (gamma == 0.0 || vad.isZero(0.0)) return tape_->constant(MatrixXd::Zero(1, 1));
  const VarD weighted = tape_->constant(MatrixXd(importance * vad));
  const VarD scaled = hadamard(shift(modifier_scale(prev_token), 1.0), weighted);
  return scale(l2_norm_sq(scaled), gamma);
}

LstmState ForwardPass::lstm_step(std::size_t kind, std::size_t layer, VarD x, const LstmState& prev) const {
  const BoundLstm& p = lstm(kind, layer);
  const Eigen::Index h = p.w_h.cols();
  const VarD gates = matmul(p.w_x, x) + matmul(p.w_h, prev.h) + p.bias;
  const VarD i = sigmoid(slice_rows(gates, 0, h));
  const VarD f = sigmoid(slice_rows(gates, h, h));
  const VarD g = tanh(slice_rows(gates, 2 * h, h));
  const VarD o = sigmoid(slice_rows(gates, 3 * h, h));
  const VarD c = hadamard(f, prev.c) + hadamard(i, g);
  return {hadamard(o, tanh(c)), c};
}

Encoded ForwardPass::encode(std::span<const int> tokens) const {
  if (tokens.empty()) throw std::invalid_argument("encode: empty input sequence");
  const auto& cfg = model_->config();
  const std::size_t T = tokens.size();
  const Eigen::Index h = cfg.hidden_dim;
  const LstmState zero{tape_->constant(MatrixXd::Zero(h, 1)), tape_->constant(MatrixXd::Zero(h, 1))};

  Encoded out;
  out.tokens.assign(tokens.begin(), tokens.end());

  std::vector<VarD> inputs;
  inputs.reserve(T);
  for (int tok : tokens) inputs.push_back(embed(tok));

  std::vector<VarD> layer_out;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    std::vector<VarD> fwd(T), bwd(T);
    LstmState s = zero;
    for (std::size_t t = 0; t < T; ++t) fwd[t] = (s = lstm_step(kEncoderFwd, l, inputs[t], s)).h;
    s = zero;
    for (std::size_t t = T; t-- > 0;) bwd[t] = (s = lstm_step(kEncoderBwd, l, inputs[t], s)).h;

    const VarD init_h = matmul(encoder_[l].proj, concat(fwd[T - 1], bwd[0]));
    out.initial.layers.push_back({init_h, tape_->constant(MatrixXd::Zero(h, 1))});

    layer_out.assign(T, VarD());
    for (std::size_t t = 0; t < T; ++t) layer_out[t] = concat(fwd[t], bwd[t]);
    inputs = layer_out;
  }

  std::vector<VarD> columns;
  columns.reserve(T);
  for (const VarD& both : layer_out) columns.push_back(matmul(encoder_.back().proj, both));
  out.memory = hstack(columns);
  out.memory_t = transpose(out.memory);

  std::vector<double> freqs;
  freqs.reserve(T);
  for (int tok : tokens) freqs.push_back(model_->tables().frequency[tok]);
  out.importance = importance_weights(freqs, cfg.importance, cfg.importance_params);

  std::vector<VarD> eta;
  eta.reserve(T);
  for (std::size_t t = 0; t < T; ++t)
    eta.push_back(affect_bias(tokens[t], t == 0 ? -1 : tokens[t - 1], out.importance[t]));
  out.eta = vstack(eta);
  return out;
}

Attention ForwardPass::attend(const VarD& decoder_state, const Encoded& encoded) const {
  const VarD energies = matmul(encoded.memory_t, decoder_state) + encoded.eta;
  const VarD alignment = softmax(energies);
  return {matmul(encoded.memory, alignment), alignment};
}

DecodeStep ForwardPass::decode_step(int prev_token, const DecoderState& state, const Encoded& encoded) const {
  if (state.layers.size() != decoder_.size())
    throw std::invalid_argument("decode_step: decoder state has the wrong number of layers");
  DecodeStep out;
  VarD x = embed(prev_token);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    out.state.layers.push_back(lstm_step(kDecoder, l, x, state.layers[l]));
    x = out.state.layers.back().h;
  }
  const Attention att = attend(x, encoded);
  out.attentional = tanh(matmul(w_c_, concat(att.context, x)) + b_c_);
  out.logits = matmul(w_o_, out.attentional) + b_o_;
  out.alignment = att.alignment;
  return out;
}

SequenceLoss ForwardPass::sequence_loss(const EncodedPair& pair, const VectorXd& weights) const {
  if (weights.size() != model_->config().vocab_size)
    throw std::invalid_argument("sequence_loss: weight vector does not match the vocabulary");
  const Encoded enc = encode(pair.input);
  DecoderState state = enc.initial;
  int prev = kSosId;
  std::vector<VarD> terms;
  SequenceLoss out;
  terms.reserve(pair.response.size() + 1);
  for (std::size_t t = 0; t <= pair.response.size(); ++t) {
    const int target = t < pair.response.size() ? pair.response[t] : kEosId;
    DecodeStep step = decode_step(prev, state, enc);
    const VarD logp = log_softmax(step.logits);
    const double lp = logp.value()(target, 0);
    out.nll -= lp;
    terms.push_back(scale(pick(logp, target), -weights[target]));
    state = std::move(step.state);
    prev = target;
  }
  out.tokens = terms.size();
  out.loss = add_n(terms);
  return out;
}

}  // namespace arseq
