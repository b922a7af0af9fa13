#pragma once

#include <cmath>
#include <vector>

#include "coqan/params.hpp"

namespace coqan::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over the parameters of one optimizer group.
template <class T>
class Adam {
 public:
  Adam(AdamConfig cfg, Group group) : cfg_(cfg), group_(group) {
    if (!(cfg.lr > 0) || !(cfg.eps > 0) || cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1)
      throw ConfigError("adam: invalid hyperparameters");
  }

  const AdamConfig& config() const { return cfg_; }
  Group group() const { return group_; }
  std::size_t steps() const { return t_; }

  // Applies one update from the current gradients. Gradients are scaled by
  // grad_scale first (1/batch for a summed batch gradient).
  void step(ParameterStore<T>& store, double grad_scale = 1.0) {
    if (m_.empty()) {
      m_.resize(store.size());
      v_.resize(store.size());
    }
    if (m_.size() != store.size()) throw ConfigError("adam: parameter store changed size");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < store.size(); ++i) {
      Parameter<T>& p = store[i];
      if (p.group != group_) continue;
      if (m_[i].size() == 0) {
        m_[i] = Matrix<double>::Zero(p.value.rows(), p.value.cols());
        v_[i] = Matrix<double>::Zero(p.value.rows(), p.value.cols());
      }
      if (p.grad.size() == 0) continue;
      auto& m = m_[i];
      auto& v = v_[i];
      T* w = p.value.data();
      const T* g = p.grad.data();
      for (Eigen::Index k = 0; k < p.value.size(); ++k) {
        const double gk = static_cast<double>(g[k]) * grad_scale;
        double& mk = m.data()[k];
        double& vk = v.data()[k];
        mk = cfg_.beta1 * mk + (1.0 - cfg_.beta1) * gk;
        vk = cfg_.beta2 * vk + (1.0 - cfg_.beta2) * gk * gk;
        const double update = cfg_.lr * (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps);
        w[k] = static_cast<T>(static_cast<double>(w[k]) - update);
      }
    }
  }

 private:
  AdamConfig cfg_;
  Group group_;
  std::size_t t_ = 0;
  std::vector<Matrix<double>> m_, v_;
};

}  // namespace coqan::nn
