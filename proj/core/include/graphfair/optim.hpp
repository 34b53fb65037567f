#pragma once

#include <cmath>
#include <vector>

#include "graphfair/matrix.hpp"

namespace graphfair {

// Adam with bias correction. One state slot per registered parameter; the
// parameters themselves live in the model structs as plain matrices.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Index of the registered slot.
  std::size_t add_slot(std::size_t n) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
    return m_.size() - 1;
  }

  void begin_step() { ++t_; }

  void update(std::size_t slot, Matrix& param, const Matrix& grad) {
    auto& m = m_[slot];
    auto& v = v_[slot];
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grad.data()[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace graphfair
