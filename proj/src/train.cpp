#include "arseq/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "arseq/eval.hpp"
#include "arseq/random.hpp"

namespace arseq {

TrainResult train(Seq2Seq& model, const std::vector<EncodedPair>& train_pairs,
                  const std::vector<EncodedPair>& valid_pairs, const AffectiveWeights& weights,
                  const TrainConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (train_pairs.empty()) throw TrainingError("no training pairs");
  if (config.batch_size <= 0 || config.epochs < 0) throw TrainingError("batch_size must be positive");
  if (weights.size() != model.config().vocab_size) throw TrainingError("weights do not match the vocabulary");

  auto params = model.params().all();
  model.params().zero_grad();
  Adam adam(config.adam, params);
  Rng rng(config.seed);

  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best_ppl = std::numeric_limits<double>::infinity();
  std::vector<MatrixXd> best_values;
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        TapeD tape;
        ForwardPass fp(tape, model);
        SequenceLoss sl = fp.sequence_loss(train_pairs[order[k]], weights.weight);
        const double value = sl.loss.scalar();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", pair " << order[k] << " (batch starting at " << start
              << "); unweighted nll " << sl.nll << " over " << sl.tokens << " steps";
          throw TrainingError(msg.str());
        }
        loss_sum += value;
        steps += sl.tokens;
        tape.backward(scale(sl.loss, inv));
      }
      clip_global_norm(params, config.clip_norm);
      adam.step();
      model.params().zero_grad();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(steps);
    if (!valid_pairs.empty()) m.val_ppl = perplexity(model, valid_pairs).perplexity;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);

    if (!valid_pairs.empty() && m.val_ppl < best_ppl) {
      best_ppl = m.val_ppl;
      result.best_epoch = epoch;
      best_values.clear();
      for (const auto* p : params) best_values.push_back(p->value);
    }
    if (m.train_loss < config.stop_below) break;
  }

  if (valid_pairs.empty()) {
    result.best_epoch = result.epochs.empty() ? 0 : result.epochs.back().epoch;
  } else if (!best_values.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best_values[k];
  }
  result.optimizer_steps = adam.steps();
  result.skipped_steps = adam.skipped();
  return result;
}

}  // namespace arseq
