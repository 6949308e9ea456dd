#pragma once

#include <span>
#include <vector>

namespace meshstyle {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive moment estimation over a flat parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamParams params);

  void step(std::span<double> params, std::span<const double> grads);

  long steps() const noexcept { return steps_; }
  const AdamParams& params() const noexcept { return params_; }
  const std::vector<double>& first_moment() const noexcept { return m_; }
  const std::vector<double>& second_moment() const noexcept { return v_; }

 private:
  AdamParams params_;
  std::vector<double> m_, v_;
  long steps_ = 0;
};

}  // namespace meshstyle
