#include "arseq/optim.hpp"

#include <cmath>

namespace arseq {

Adam::Adam(AdamConfig config, std::vector<Parameter<double>*> params)
    : config_(config), params_(std::move(params)) {
  for (const auto* p : params_) {
    m_.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

bool Adam::step() {
  for (const auto* p : params_) {
    if (!p->grad.allFinite()) {
      ++skipped_;
      return false;
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * p.grad;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= config_.learning_rate * (m_[k].array() / c1) /
                       ((v_[k].array() / c2).sqrt() + config_.epsilon);
  }
  return true;
}

double clip_global_norm(const std::vector<Parameter<double>*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad *= s;
  }
  return norm;
}

}  // namespace arseq
