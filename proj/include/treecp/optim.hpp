#pragma once

#include <cmath>
#include <vector>

#include "treecp/tape.hpp"

namespace treecp {

enum class OptimizerKind { adadelta, adam };

inline double global_grad_norm(const ParamStore& st) {
  double sq = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const Param& p = st[i];
    if (!p.trainable) continue;
    for (double g : p.grad.data) sq += g * g;
  }
  return std::sqrt(sq);
}

inline void clip_gradients(ParamStore& st, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = global_grad_norm(st);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (std::size_t i = 0; i < st.size(); ++i) {
    Param& p = st[i];
    if (!p.trainable) continue;
    for (double& g : p.grad.data) g *= s;
  }
}

// Zeiler's AdaDelta: running averages of squared gradients and squared
// updates; no learning rate.
class AdaDelta {
 public:
  double rho = 0.95;
  double eps = 1e-6;

  AdaDelta() = default;
  AdaDelta(double rho_, double eps_) : rho(rho_), eps(eps_) {}

  void step(ParamStore& st) {
    ensure(st);
    for (std::size_t i = 0; i < st.size(); ++i) {
      Param& p = st[i];
      if (!p.trainable) continue;
      Tensor& eg2 = grad_avg_[i];
      Tensor& edx2 = update_avg_[i];
      for (std::size_t k = 0; k < p.value.numel(); ++k) {
        const double g = p.grad[k];
        eg2[k] = rho * eg2[k] + (1.0 - rho) * g * g;
        const double dx = -std::sqrt(edx2[k] + eps) / std::sqrt(eg2[k] + eps) * g;
        edx2[k] = rho * edx2[k] + (1.0 - rho) * dx * dx;
        p.value[k] += dx;
      }
    }
  }

 private:
  std::vector<Tensor> grad_avg_, update_avg_;

  void ensure(const ParamStore& st) {
    if (grad_avg_.size() == st.size()) return;
    grad_avg_.clear();
    update_avg_.clear();
    for (std::size_t i = 0; i < st.size(); ++i) {
      grad_avg_.push_back(zeros_like(st[i].value));
      update_avg_.push_back(zeros_like(st[i].value));
    }
  }
};

// Adam with bias correction.
class Adam {
 public:
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  Adam() = default;
  Adam(double lr_, double b1, double b2, double eps_) : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {}

  void step(ParamStore& st) {
    ensure(st);
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < st.size(); ++i) {
      Param& p = st[i];
      if (!p.trainable) continue;
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t k = 0; k < p.value.numel(); ++k) {
        const double g = p.grad[k];
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        p.value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  std::vector<Tensor> m_, v_;
  long t_ = 0;

  void ensure(const ParamStore& st) {
    if (m_.size() == st.size()) return;
    m_.clear();
    v_.clear();
    for (std::size_t i = 0; i < st.size(); ++i) {
      m_.push_back(zeros_like(st[i].value));
      v_.push_back(zeros_like(st[i].value));
    }
  }
};

}  // namespace treecp
