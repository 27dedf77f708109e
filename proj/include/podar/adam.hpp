#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "podar/errors.hpp"

namespace podar {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation with bias correction. The moment state is
// strictly sequential; one instance drives one optimization run.
class Adam {
 public:
  Adam(AdamSettings settings, std::size_t size)
      : settings_(settings), first_(size, 0.0), second_(size, 0.0) {
    if (!(settings.learning_rate > 0.0)) {
      throw InvalidInputError("learning rate must be positive");
    }
    if (!(settings.beta1 >= 0.0 && settings.beta1 < 1.0) ||
        !(settings.beta2 >= 0.0 && settings.beta2 < 1.0)) {
      throw InvalidInputError("moment decay rates must lie in [0, 1)");
    }
  }

  void update(std::span<double> params, std::span<const double> grad) {
    if (params.size() != first_.size() || grad.size() != first_.size()) {
      throw InvalidInputError("parameter/gradient size mismatch");
    }
    beta1_power_ *= settings_.beta1;
    beta2_power_ *= settings_.beta2;
    const double c1 = 1.0 - beta1_power_;
    const double c2 = 1.0 - beta2_power_;
    for (std::size_t i = 0; i < first_.size(); ++i) {
      first_[i] = settings_.beta1 * first_[i] + (1.0 - settings_.beta1) * grad[i];
      second_[i] = settings_.beta2 * second_[i] + (1.0 - settings_.beta2) * grad[i] * grad[i];
      const double m_hat = first_[i] / c1;
      const double v_hat = second_[i] / c2;
      params[i] -= settings_.learning_rate * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
    }
  }

 private:
  AdamSettings settings_;
  std::vector<double> first_;
  std::vector<double> second_;
  double beta1_power_ = 1.0;
  double beta2_power_ = 1.0;
};

}  // namespace podar
