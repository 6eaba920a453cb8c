#pragma once

#include <cstddef>
#include <vector>

#include "arseq/tensor.hpp"

namespace arseq {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed parameter list. Gradients are read
/// from Parameter::grad; a step with any non-finite gradient is skipped.
class Adam {
 public:
  Adam(AdamConfig config, std::vector<Parameter<double>*> params);

  /// Returns false when the step was skipped.
  bool step();

  std::size_t steps() const { return steps_; }
  std::size_t skipped() const { return skipped_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<MatrixXd>& first_moments() const { return m_; }
  const std::vector<MatrixXd>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Parameter<double>*> params_;
  std::vector<MatrixXd> m_;
  std::vector<MatrixXd> v_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

/// Rescales all gradients so their joint l2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(const std::vector<Parameter<double>*>& params, double max_norm);

}  // namespace arseq
