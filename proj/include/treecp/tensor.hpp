#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "treecp/common.hpp"

namespace treecp {

// Dense row-major tensor of doubles. Rank 1 and 2 cover almost all uses;
// higher ranks appear only for full multi-affine parameter tensors.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(numel_of(shape), 0.0) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }
  static Tensor from(std::initializer_list<double> vals) {
    Tensor t({vals.size()});
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  std::size_t rows() const { return shape[0]; }
  std::size_t cols() const { return shape[1]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

// ---------------------------------------------------------------------------
// scalar kernels

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// elementwise activations on tensors

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = sigmoid_scalar(v);
  return y;
}

inline Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::tanh(v);
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

// Max-shifted so large logits do not overflow.
inline Tensor softmax(const Tensor& x) {
  Tensor y = x;
  double mx = *std::max_element(y.data.begin(), y.data.end());
  double z = 0.0;
  for (double& v : y.data) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : y.data) v /= z;
  return y;
}

inline Tensor elementwise_product(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw dim_error("elementwise_product: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] *= b.data[i];
  return y;
}

// Inverted dropout: survivors are rescaled at training time so that the
// evaluation path is a pure identity.
inline Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw usage_error("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  Tensor y = x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  for (double& v : y.data) v = (u(rng) < rate) ? 0.0 : v / keep;
  return y;
}

// ---------------------------------------------------------------------------
// parameter initialization: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))

inline void init_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  if (fan_in == 0) {
    t.zero();
    return;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.data) v = u(rng);
}

inline void init_uniform_range(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data) v = u(rng);
}

inline std::size_t argmax_lowest(const Tensor& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.numel(); ++i)
    if (p.data[i] > p.data[best]) best = i;  // strict: ties keep the lowest index
  return best;
}

inline double linf_distance(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace treecp
