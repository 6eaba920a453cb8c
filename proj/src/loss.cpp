#include "arseq/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "arseq/tokens.hpp"

namespace arseq {

AffectiveWeights weights_from_norms(const VectorXd& vad_norms, double delta) {
  if (delta < 0) throw std::invalid_argument("affective loss coefficient must be nonnegative");
  if (vad_norms.size() == 0) throw std::invalid_argument("affective weights need a non-empty vocabulary");
  AffectiveWeights w;
  w.delta = delta;
  w.weight = (1.0 + delta * vad_norms.array()).matrix();
  w.weight *= static_cast<double>(vad_norms.size()) / w.weight.sum();
  return w;
}

AffectiveWeights compute_weights(const VadLexicon& lexicon, const Vocabulary& vocab, double delta) {
  VectorXd norms(static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t i = 0; i < vocab.size(); ++i)
    norms[static_cast<Eigen::Index>(i)] = lexicon.lookup_normalized(vocab.token(static_cast<int>(i))).norm();
  return weights_from_norms(norms, delta);
}

LossValue affective_loss(const std::vector<VectorXd>& step_distributions, const std::vector<int>& targets,
                         const AffectiveWeights& weights) {
  if (step_distributions.size() != targets.size())
    throw std::invalid_argument("affective_loss: " + std::to_string(step_distributions.size()) +
                                " distributions for " + std::to_string(targets.size()) + " targets");
  LossValue out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const int y = targets[t];
    if (y < 0 || y >= weights.size() || y >= step_distributions[t].size())
      throw std::out_of_range("affective_loss: target id " + std::to_string(y) + " outside the vocabulary");
    if (y == kPadId) continue;
    double p = step_distributions[t][y];
    if (!(p >= kProbabilityFloor)) {
      p = kProbabilityFloor;
      ++out.clamped;
    }
    out.sum += -weights[y] * std::log(p);
    ++out.steps;
  }
  out.mean = out.steps ? out.sum / static_cast<double>(out.steps) : 0.0;
  return out;
}

}  // namespace arseq
