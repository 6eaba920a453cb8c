#pragma once

#include <cstddef>
#include <vector>

#include "arseq/corpus.hpp"
#include "arseq/lexicon.hpp"
#include "arseq/tensor.hpp"

namespace arseq {

/// Constant per-token loss weights proportional to 1 + delta * ||vad||,
/// scaled so they average to one over the vocabulary. Padding targets are
/// masked in the loss instead.
struct AffectiveWeights {
  VectorXd weight;
  double delta = 0.0;

  double operator[](int id) const { return weight[id]; }
  int size() const { return static_cast<int>(weight.size()); }
};

AffectiveWeights weights_from_norms(const VectorXd& vad_norms, double delta);
AffectiveWeights compute_weights(const VadLexicon& lexicon, const Vocabulary& vocab, double delta);

struct LossValue {
  double sum = 0.0;
  double mean = 0.0;        // per decoding step
  std::size_t steps = 0;
  std::size_t clamped = 0;  // targets whose probability was floored
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Weighted cross-entropy over explicit per-step distributions.
LossValue affective_loss(const std::vector<VectorXd>& step_distributions, const std::vector<int>& targets,
                         const AffectiveWeights& weights);

}  // namespace arseq
