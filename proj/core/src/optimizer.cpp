#include "meshstyle/optimizer.hpp"

#include "meshstyle/error.hpp"

#include <cmath>

namespace meshstyle {

Adam::Adam(std::size_t size, AdamParams params) : params_(params), m_(size, 0.0), v_(size, 0.0) {
  if (!(params.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw DimensionError("Adam::step: parameter block size mismatch");
  ++steps_;
  const double b1 = params_.beta1, b2 = params_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= params_.learning_rate * mhat / (std::sqrt(vhat) + params_.epsilon);
  }
}

}  // namespace meshstyle
