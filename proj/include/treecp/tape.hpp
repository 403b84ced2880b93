#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecp/tensor.hpp"

namespace treecp {

// A named parameter with a persistent gradient slot. Gradients accumulate
// across tapes via Tape::accumulate_param_grads (the explicit merge step).
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  explicit Param(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
};

// Registration-ordered parameter container; ordering is what makes seeded
// initialization and optimizer traversal reproducible.
class ParamStore {
 public:
  Param& add(std::string name, Tensor value) {
    if (index_.count(name)) throw usage_error("ParamStore: duplicate parameter " + name);
    params_.push_back(std::make_unique<Param>(name, std::move(value)));
    index_[params_.back()->name] = params_.size() - 1;
    return *params_.back();
  }

  Param* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Param& at(const std::string& name) {
    Param* p = find(name);
    if (!p) throw usage_error("ParamStore: unknown parameter " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return *params_[i]; }
  const Param& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grads() {
    for (auto& p : params_) p->grad.zero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

  std::size_t scalar_count_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p->name.rfind(prefix, 0) == 0) n += p->value.numel();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Var {
  std::uint32_t i = 0;
};

// Reverse-mode tape. Ops record pull closures; backward propagates a fresh
// seed through a per-pass buffer and then adds into the persistent slots, so
// repeated backward calls accumulate.
class Tape {
 public:
  Var constant(Tensor v) { return push(std::move(v)); }

  Var zeros(std::vector<std::size_t> shape) { return push(Tensor(std::move(shape))); }

  Var param(Param& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return it->second;
    Var v = push(p.value, {}, &p);
    param_cache_.emplace(&p, v);
    return v;
  }

  const Tensor& val(Var v) const { return nodes_[v.i].value; }

  const Tensor& grad(Var v) {
    Tensor& g = nodes_[v.i].grad;
    if (g.data.size() != nodes_[v.i].value.numel()) g = zeros_like(nodes_[v.i].value);
    return g;
  }

  std::size_t size() const { return nodes_.size(); }

  // -- elementwise ----------------------------------------------------------

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += val(b)[i];
    return push(std::move(out), [a, b, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      t.axpy(a, 1.0, g);
      t.axpy(b, 1.0, g);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= val(b)[i];
    return push(std::move(out), [a, b, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      t.axpy(a, 1.0, g);
      t.axpy(b, -1.0, g);
    });
  }

  Var hadamard(Var a, Var b) {
    check_same(a, b, "hadamard");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= val(b)[i];
    return push(std::move(out), [a, b, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      Tensor& ga = t.pg(a);
      Tensor& gb = t.pg(b);
      const Tensor& va = t.val(a);
      const Tensor& vb = t.val(b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i] * vb[i];
        gb[i] += g[i] * va[i];
      }
    });
  }

  Var scale(Var a, double k) {
    Tensor out = val(a);
    for (double& v : out.data) v *= k;
    return push(std::move(out), [a, k, o = next()](Tape& t) { t.axpy(a, k, t.pg(o)); });
  }

  Var abs_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::abs(v);
    return push(std::move(out), [a, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& va = t.val(a);
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < g.numel(); ++i)
        ga[i] += g[i] * (va[i] > 0.0 ? 1.0 : (va[i] < 0.0 ? -1.0 : 0.0));
    });
  }

  Var mul_const(Var a, Tensor m) {
    if (!val(a).same_shape(m))
      throw dim_error("mul_const: shape mismatch " + val(a).shape_str() + " vs " + m.shape_str());
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= m[i];
    return push(std::move(out), [a, m = std::move(m), o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * m[i];
    });
  }

  // -- linear maps -----------------------------------------------------------

  // W {m,n} * x {n} -> {m}
  Var matvec(Var W, Var x) {
    const Tensor& w = val(W);
    const Tensor& v = val(x);
    if (w.rank() != 2 || v.rank() != 1 || w.cols() != v.numel())
      throw dim_error("matvec: " + w.shape_str() + " x " + v.shape_str());
    Tensor out({w.rows()});
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) s += w(r, c) * v[c];
      out[r] = s;
    }
    return push(std::move(out), [W, x, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& w = t.val(W);
      const Tensor& v = t.val(x);
      Tensor& gw = t.pg(W);
      Tensor& gx = t.pg(x);
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double gr = g[r];
        for (std::size_t c = 0; c < w.cols(); ++c) {
          gw(r, c) += gr * v[c];
          gx[c] += gr * w(r, c);
        }
      }
    });
  }

  // W x + b
  Var affine(Var W, Var x, Var b) { return add(matvec(W, x), b); }

  // Homogeneous factor application: U {n+1, r}, x {n} -> {r};
  // e(i) = sum_j U(j,i) x(j) + U(n,i). The last row is the bias row of the
  // homogeneous coordinate [x; 1].
  Var mode_apply(Var U, Var x) {
    const Tensor& u = val(U);
    const Tensor& v = val(x);
    if (u.rank() != 2 || v.rank() != 1 || u.rows() != v.numel() + 1)
      throw dim_error("mode_apply: factor " + u.shape_str() + " expects input of length " +
                      std::to_string(u.rows() - 1) + ", got " + v.shape_str());
    const std::size_t n = v.numel();
    const std::size_t r = u.cols();
    Tensor out({r});
    for (std::size_t i = 0; i < r; ++i) {
      double s = u(n, i);
      for (std::size_t j = 0; j < n; ++j) s += u(j, i) * v[j];
      out[i] = s;
    }
    return push(std::move(out), [U, x, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& u = t.val(U);
      const Tensor& v = t.val(x);
      Tensor& gu = t.pg(U);
      Tensor& gx = t.pg(x);
      const std::size_t n = v.numel();
      for (std::size_t i = 0; i < u.cols(); ++i) {
        const double gi = g[i];
        gu(n, i) += gi;
        for (std::size_t j = 0; j < n; ++j) {
          gu(j, i) += gi * v[j];
          gx[j] += gi * u(j, i);
        }
      }
    });
  }

  // Output projection: Q {r,K}, e {r}, q {K} -> {K}; out(k) = sum_i Q(i,k) e(i) + q(k).
  Var proj(Var Q, Var e, Var q) {
    const Tensor& qm = val(Q);
    const Tensor& ev = val(e);
    const Tensor& qb = val(q);
    if (qm.rank() != 2 || qm.rows() != ev.numel() || qm.cols() != qb.numel())
      throw dim_error("proj: " + qm.shape_str() + " with e " + ev.shape_str() + ", q " +
                      qb.shape_str());
    Tensor out = qb;
    for (std::size_t i = 0; i < qm.rows(); ++i) {
      const double ei = ev[i];
      for (std::size_t k = 0; k < qm.cols(); ++k) out[k] += qm(i, k) * ei;
    }
    return push(std::move(out), [Q, e, q, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& qm = t.val(Q);
      const Tensor& ev = t.val(e);
      Tensor& gq = t.pg(Q);
      Tensor& ge = t.pg(e);
      t.axpy(q, 1.0, g);
      for (std::size_t i = 0; i < qm.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < qm.cols(); ++k) {
          gq(i, k) += ev[i] * g[k];
          acc += qm(i, k) * g[k];
        }
        ge[i] += acc;
      }
    });
  }

  // Row slice of a rank-2 tensor (embedding lookup).
  Var row(Var table, std::size_t r) {
    const Tensor& tb = val(table);
    if (tb.rank() != 2 || r >= tb.rows())
      throw dim_error("row: index " + std::to_string(r) + " into " + tb.shape_str());
    Tensor out({tb.cols()});
    for (std::size_t c = 0; c < tb.cols(); ++c) out[c] = tb(r, c);
    return push(std::move(out), [table, r, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      Tensor& gt = t.pg(table);
      for (std::size_t c = 0; c < g.numel(); ++c) gt(r, c) += g[c];
    });
  }

  // -- nonlinearities --------------------------------------------------------

  Var sigmoid_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = sigmoid_scalar(v);
    return push(std::move(out), [a, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& y = t.val(Var{o});
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  }

  Var tanh_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    return push(std::move(out), [a, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& y = t.val(Var{o});
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  }

  Var relu_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), [a, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& va = t.val(a);
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (va[i] > 0.0) ga[i] += g[i];
    });
  }

  Var softmax_(Var a) {
    Tensor out = softmax(val(a));
    return push(std::move(out), [a, o = next()](Tape& t) {
      const Tensor& g = t.pg(o);
      const Tensor& y = t.val(Var{o});
      Tensor& ga = t.pg(a);
      double dot = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += y[i] * (g[i] - dot);
    });
  }

  // -- reductions and losses --------------------------------------------------

  Var sum(Var a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s), [a, o = next()](Tape& t) {
      const double g = t.pg(o)[0];
      Tensor& ga = t.pg(a);
      for (double& v : ga.data) v += g;
    });
  }

  Var dot(Var a, Var b) {
    check_same(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < val(a).numel(); ++i) s += val(a)[i] * val(b)[i];
    return push(Tensor::scalar(s), [a, b, o = next()](Tape& t) {
      const double g = t.pg(o)[0];
      const Tensor& va = t.val(a);
      const Tensor& vb = t.val(b);
      Tensor& ga = t.pg(a);
      Tensor& gb = t.pg(b);
      for (std::size_t i = 0; i < va.numel(); ++i) {
        ga[i] += g * vb[i];
        gb[i] += g * va[i];
      }
    });
  }

  Var dot_const(Var a, Tensor w) {
    if (!val(a).same_shape(w))
      throw dim_error("dot_const: shape mismatch " + val(a).shape_str() + " vs " + w.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) s += val(a)[i] * w[i];
    return push(Tensor::scalar(s), [a, w = std::move(w), o = next()](Tape& t) {
      const double g = t.pg(o)[0];
      Tensor& ga = t.pg(a);
      for (std::size_t i = 0; i < w.numel(); ++i) ga[i] += g * w[i];
    });
  }

  // Cross entropy against a class index: -log p[target].
  Var ce_loss(Var p, std::size_t target) {
    const Tensor& pv = val(p);
    if (target >= pv.numel())
      throw usage_error("ce_loss: target " + std::to_string(target) + " out of range");
    return push(Tensor::scalar(-std::log(pv[target])), [p, target, o = next()](Tape& t) {
      const double g = t.pg(o)[0];
      t.pg(p)[target] -= g / t.val(p)[target];
    });
  }

  // KL(q || p) with a constant target distribution q; 0 log 0 = 0.
  Var kl_loss(Var p, Tensor q) {
    const Tensor& pv = val(p);
    if (!pv.same_shape(q))
      throw dim_error("kl_loss: shape mismatch " + pv.shape_str() + " vs " + q.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < q.numel(); ++i)
      if (q[i] > 0.0) s += q[i] * (std::log(q[i]) - std::log(pv[i]));
    return push(Tensor::scalar(s), [p, q = std::move(q), o = next()](Tape& t) {
      const double g = t.pg(o)[0];
      const Tensor& pv = t.val(p);
      Tensor& gp = t.pg(p);
      for (std::size_t i = 0; i < q.numel(); ++i)
        if (q[i] > 0.0) gp[i] -= g * q[i] / pv[i];
    });
  }

  // -- backward ----------------------------------------------------------------

  void backward(Var root) {
    if (val(root).numel() != 1) throw usage_error("backward: root is not a scalar");
    pass_.assign(nodes_.size(), Tensor{});
    pg(root.i)[0] = 1.0;
    for (std::size_t i = root.i + 1; i-- > 0;) {
      if (pass_[i].data.empty()) continue;
      if (nodes_[i].pull) nodes_[i].pull(*this);
    }
    for (std::size_t i = 0; i <= root.i; ++i) {
      if (pass_[i].data.empty()) continue;
      Tensor& g = nodes_[i].grad;
      if (g.data.size() != nodes_[i].value.numel()) g = zeros_like(nodes_[i].value);
      for (std::size_t k = 0; k < g.numel(); ++k) g[k] += pass_[i][k];
    }
    pass_.clear();
  }

  void reset_grads() {
    for (auto& n : nodes_) n.grad = Tensor{};
  }

  // Merge step: adds parameter-leaf gradients into their Param slots.
  void accumulate_param_grads(double s = 1.0) {
    for (auto& [p, v] : param_cache_) {
      if (!p->trainable) continue;
      const Tensor& g = nodes_[v.i].grad;
      if (g.data.empty()) continue;
      for (std::size_t i = 0; i < g.numel(); ++i) p->grad[i] += s * g[i];
    }
  }

 private:
  struct NodeRec {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> pull;
    Param* param = nullptr;
  };

  std::vector<NodeRec> nodes_;
  std::vector<Tensor> pass_;  // per-backward gradient buffer
  std::unordered_map<Param*, Var> param_cache_;

  std::uint32_t next() const { return static_cast<std::uint32_t>(nodes_.size()); }

  Var push(Tensor v, std::function<void(Tape&)> pull = {}, Param* p = nullptr) {
    nodes_.push_back(NodeRec{std::move(v), Tensor{}, std::move(pull), p});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Tensor& pg(std::uint32_t i) {
    if (pass_[i].data.empty()) pass_[i] = zeros_like(nodes_[i].value);
    return pass_[i];
  }
  Tensor& pg(Var v) { return pg(v.i); }

  void axpy(Var dst, double k, const Tensor& g) {
    Tensor& d = pg(dst);
    for (std::size_t i = 0; i < g.numel(); ++i) d[i] += k * g[i];
  }

  void check_same(Var a, Var b, const char* op) const {
    if (!val(a).same_shape(val(b)))
      throw dim_error(std::string(op) + ": shape mismatch " + val(a).shape_str() + " vs " +
                      val(b).shape_str());
  }
};

// Hidden/memory pair attached to a tree node during encoding.
struct State {
  Var h;
  Var c;
};

}  // namespace treecp
