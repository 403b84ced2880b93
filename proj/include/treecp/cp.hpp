#pragma once

#include <random>
#include <string>
#include <vector>

#include "treecp/tensor.hpp"

namespace treecp {

// Factorized multi-affine map. Input factors are homogeneous, (d_j+1) x r,
// with the bias row last; the output mode has an explicit projection Q {r,K}
// and bias q {K}. With shared=true a single factor matrix serves every input
// mode, which makes the map applicable at any arity.
struct CPFactors {
  std::vector<Tensor> input_factors;
  Tensor output_factor;  // Q, {r, K}
  Tensor output_bias;    // q, {K}
  bool shared = false;

  std::size_t rank() const { return output_factor.rows(); }
  std::size_t output_dim() const { return output_factor.cols(); }

  const Tensor& factor(std::size_t mode) const {
    return shared ? input_factors[0] : input_factors[mode];
  }

  std::size_t input_dim(std::size_t mode) const { return factor(mode).rows() - 1; }

  std::size_t scalar_count(std::size_t arity) const {
    std::size_t n = output_factor.numel() + output_bias.numel();
    if (shared) return n + input_factors[0].numel();
    std::size_t total = n;
    for (std::size_t j = 0; j < arity; ++j) total += input_factors[j].numel();
    return total;
  }

  static CPFactors random(std::vector<std::size_t> dims, std::size_t rank,
                          std::size_t out_dim, std::mt19937_64& rng, bool shared = false) {
    CPFactors f;
    f.shared = shared;
    std::size_t modes = shared ? 1 : dims.size();
    for (std::size_t j = 0; j < modes; ++j) {
      Tensor u({dims[j] + 1, rank});
      init_uniform(u, dims[j] + 1, rng);
      f.input_factors.push_back(std::move(u));
    }
    f.output_factor = Tensor({rank, out_dim});
    init_uniform(f.output_factor, rank, rng);
    f.output_bias = Tensor({out_dim});
    return f;
  }
};

// Dense multi-affine parameter tensor of shape (d_1+1) x ... x (d_L+1) x K.
struct FullTensorMap {
  Tensor t;

  std::size_t arity() const { return t.rank() - 1; }
  std::size_t input_dim(std::size_t mode) const { return t.shape[mode] - 1; }
  std::size_t output_dim() const { return t.shape.back(); }
};

namespace detail {

inline std::size_t flat_index(const std::vector<std::size_t>& shape,
                              const std::vector<std::size_t>& idx) {
  std::size_t f = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) f = f * shape[i] + idx[i];
  return f;
}

// Odometer over the first `modes` axes of `shape`; returns false once exhausted.
inline bool advance(std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape,
                    std::size_t modes) {
  for (std::size_t j = modes; j-- > 0;) {
    if (++idx[j] < shape[j]) return true;
    idx[j] = 0;
  }
  return false;
}

}  // namespace detail

// Expands the factorized form into the dense tensor:
// T(j_1..j_L, k) = sum_i U_1(j_1,i) ... U_L(j_L,i) Q(i,k), with the output
// bias folded into the all-bias-index slice. `arity` is required for shared
// factors; otherwise it defaults to the number of stored factors.
inline FullTensorMap cp_reconstruct(const CPFactors& f, std::size_t arity = 0) {
  const std::size_t L = arity ? arity : f.input_factors.size();
  if (L == 0) throw usage_error("cp_reconstruct: arity required for shared factors");
  std::vector<std::size_t> shape;
  for (std::size_t j = 0; j < L; ++j) shape.push_back(f.factor(j).rows());
  const std::size_t K = f.output_dim();
  shape.push_back(K);
  FullTensorMap m{Tensor(shape)};

  const std::size_t r = f.rank();
  std::vector<std::size_t> idx(shape.size(), 0);
  do {
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < r; ++i) {
        double prod = f.output_factor(i, k);
        for (std::size_t j = 0; j < L; ++j) prod *= f.factor(j)(idx[j], i);
        s += prod;
      }
      idx[L] = k;
      m.t[detail::flat_index(shape, idx)] = s;
    }
    idx[L] = 0;
  } while (detail::advance(idx, shape, L));

  // all-bias slice picks up the explicit output bias
  std::vector<std::size_t> bias_idx(shape.size(), 0);
  for (std::size_t j = 0; j < L; ++j) bias_idx[j] = shape[j] - 1;
  for (std::size_t k = 0; k < K; ++k) {
    bias_idx[L] = k;
    m.t[detail::flat_index(shape, bias_idx)] += f.output_bias[k];
  }
  return m;
}

// Dense contraction over homogeneous inputs:
// out(k) = sum_{j_1..j_L} T(j_1..j_L, k) a1(j_1) ... aL(j_L), a = [input; 1].
inline Tensor apply_full(const FullTensorMap& m, const std::vector<Tensor>& inputs) {
  const std::size_t L = m.arity();
  if (inputs.size() != L)
    throw dim_error("apply_full: expected " + std::to_string(L) + " inputs, got " +
                    std::to_string(inputs.size()));
  std::vector<Tensor> hom;
  for (std::size_t j = 0; j < L; ++j) {
    if (inputs[j].numel() != m.input_dim(j))
      throw dim_error("apply_full: mode " + std::to_string(j) + " expects length " +
                      std::to_string(m.input_dim(j)) + ", got " +
                      std::to_string(inputs[j].numel()));
    Tensor a({inputs[j].numel() + 1});
    for (std::size_t i = 0; i < inputs[j].numel(); ++i) a[i] = inputs[j][i];
    a[inputs[j].numel()] = 1.0;
    hom.push_back(std::move(a));
  }

  const std::size_t K = m.output_dim();
  Tensor out({K});
  std::vector<std::size_t> idx(m.t.rank(), 0);
  do {
    double w = 1.0;
    for (std::size_t j = 0; j < L; ++j) w *= hom[j][idx[j]];
    for (std::size_t k = 0; k < K; ++k) {
      idx[L] = k;
      out[k] += w * m.t[detail::flat_index(m.t.shape, idx)];
    }
    idx[L] = 0;
  } while (detail::advance(idx, m.t.shape, L));
  return out;
}

// Factorized application: e_j = U_j^T [a_j; 1] per mode, elementwise product
// across modes, then Q^T e + q. Shared factors accept any arity.
inline Tensor cp_apply(const CPFactors& f, const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw usage_error("cp_apply: no inputs");
  if (!f.shared && inputs.size() != f.input_factors.size())
    throw dim_error("cp_apply: expected " + std::to_string(f.input_factors.size()) +
                    " inputs, got " + std::to_string(inputs.size()));
  const std::size_t r = f.rank();
  Tensor e({r});
  e.fill(1.0);
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const Tensor& u = f.factor(j);
    const std::size_t n = u.rows() - 1;
    if (inputs[j].numel() != n)
      throw dim_error("cp_apply: mode " + std::to_string(j) + " expects length " +
                      std::to_string(n) + ", got " + std::to_string(inputs[j].numel()));
    for (std::size_t i = 0; i < r; ++i) {
      double s = u(n, i);
      for (std::size_t k = 0; k < n; ++k) s += u(k, i) * inputs[j][k];
      e[i] *= s;
    }
  }
  const std::size_t K = f.output_dim();
  Tensor out({K});
  for (std::size_t k = 0; k < K; ++k) {
    double s = f.output_bias[k];
    for (std::size_t i = 0; i < r; ++i) s += f.output_factor(i, k) * e[i];
    out[k] = s;
  }
  return out;
}

}  // namespace treecp
