#pragma once

#include <cmath>
#include <vector>

#include "superpix/layers.hpp"

namespace superpix {

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

/// Adam with bias-corrected moments over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const double lr = opts_.learning_rate;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double g = static_cast<double>(p.grad[k]) + opts_.weight_decay * p.value[k];
        m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g;
        v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g * g;
        const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opts_.epsilon);
        p.value[k] = static_cast<T>(p.value[k] - update);
      }
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamOptions opts_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace superpix
