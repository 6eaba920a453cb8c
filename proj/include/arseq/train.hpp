#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "arseq/loss.hpp"
#include "arseq/model.hpp"
#include "arseq/optim.hpp"

namespace arseq {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 5;
  int batch_size = 64;
  AdamConfig adam;
  double clip_norm = 5.0;  // <= 0 disables
  std::uint64_t seed = 1;
  bool shuffle = true;
  double stop_below = 0.0;  // stop once an epoch's train_loss is below this
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // weighted loss per decoding step
  double val_ppl = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
  std::size_t optimizer_steps = 0;
  std::size_t skipped_steps = 0;
};

/// Teacher-forced minibatch training. Each batch sums per-pair losses scaled
/// by 1/batch. When validation pairs are given, the parameters of the epoch
/// with the lowest validation perplexity are restored at the end.
TrainResult train(Seq2Seq& model, const std::vector<EncodedPair>& train_pairs,
                  const std::vector<EncodedPair>& valid_pairs, const AffectiveWeights& weights,
                  const TrainConfig& config, const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace arseq
