#pragma once

#include <random>
#include <string>

#include "treecp/cells.hpp"
#include "treecp/tape.hpp"

namespace treecp {

namespace detail {

inline Tensor dropout_mask(std::size_t n, double rate, std::mt19937_64& rng) {
  Tensor m({n});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  for (double& v : m.data) v = (u(rng) < rate) ? 0.0 : 1.0 / keep;
  return m;
}

inline Var maybe_dropout(Tape& t, Var x, double rate, bool training, std::mt19937_64* rng) {
  if (!training || rate == 0.0) return x;
  if (!rng) throw usage_error("dropout requires an rng in training mode");
  return t.mul_const(x, dropout_mask(t.val(x).numel(), rate, *rng));
}

}  // namespace detail

// Single-layer classifier over the root encoding. s == 0 skips the hidden
// layer and computes logits directly from the input.
struct ClassifierHead {
  Param* W1 = nullptr;
  Param* b1 = nullptr;
  Param* W2 = nullptr;
  Param* b2 = nullptr;
  int d = 0, s = 0, m = 0;
  double dropout_rate = 0.5;

  static ClassifierHead wire(ParamStore& st, int d, int s, int m, std::mt19937_64* rng) {
    ClassifierHead h;
    h.d = d;
    h.s = s;
    h.m = m;
    const auto du = static_cast<std::size_t>(d);
    const auto su = static_cast<std::size_t>(s);
    const auto mu = static_cast<std::size_t>(m);
    if (s > 0) {
      h.W1 = &detail::wire_param(st, "head.W1", {su, du}, rng, du);
      h.b1 = &detail::wire_param(st, "head.b1", {su}, rng, 0);
      h.W2 = &detail::wire_param(st, "head.W2", {mu, su}, rng, su);
    } else {
      h.W2 = &detail::wire_param(st, "head.W2", {mu, du}, rng, du);
    }
    h.b2 = &detail::wire_param(st, "head.b2", {mu}, rng, 0);
    return h;
  }

  Var probs(Tape& t, Var h_root, bool training, std::mt19937_64* rng) const {
    if (static_cast<int>(t.val(h_root).numel()) != d)
      throw dim_error("classify: input has length " + std::to_string(t.val(h_root).numel()) +
                      ", head expects " + std::to_string(d));
    Var x = detail::maybe_dropout(t, h_root, dropout_rate, training, rng);
    if (s > 0) {
      Var hid = t.relu_(t.affine(t.param(*W1), x, t.param(*b1)));
      hid = detail::maybe_dropout(t, hid, dropout_rate, training, rng);
      return t.softmax_(t.affine(t.param(*W2), hid, t.param(*b2)));
    }
    return t.softmax_(t.affine(t.param(*W2), x, t.param(*b2)));
  }
};

enum class PairTask { relatedness, entailment };

// Sentence-pair head: features |h_a - h_b| and h_a (.) h_b feed a sigmoid
// layer, then a softmax output. Relatedness reads out the expected score
// r^T p with r = [1..m]; entailment takes the argmax class.
struct PairHead {
  Param* Wp = nullptr;  // on |h_a - h_b|
  Param* Wx = nullptr;  // on h_a (.) h_b
  Param* b = nullptr;
  Param* Wout = nullptr;
  Param* bout = nullptr;
  int d = 0, s = 0, m = 0;
  PairTask task = PairTask::relatedness;
  bool use_dropout = false;  // dropout belongs to the classification path;
                             // enable here explicitly if wanted
  double dropout_rate = 0.5;

  static PairHead wire(ParamStore& st, PairTask task, int d, int s, int m,
                       std::mt19937_64* rng) {
    if (s <= 0) throw usage_error("pair head requires hidden size s >= 1");
    PairHead h;
    h.task = task;
    h.d = d;
    h.s = s;
    h.m = m;
    const auto du = static_cast<std::size_t>(d);
    const auto su = static_cast<std::size_t>(s);
    const auto mu = static_cast<std::size_t>(m);
    h.Wp = &detail::wire_param(st, "head.Wp", {su, du}, rng, du);
    h.Wx = &detail::wire_param(st, "head.Wx", {su, du}, rng, du);
    h.b = &detail::wire_param(st, "head.b", {su}, rng, 0);
    const std::string out = task == PairTask::relatedness ? "head.Wr" : "head.We";
    const std::string outb = task == PairTask::relatedness ? "head.br" : "head.be";
    h.Wout = &detail::wire_param(st, out, {mu, su}, rng, su);
    h.bout = &detail::wire_param(st, outb, {mu}, rng, 0);
    return h;
  }

  Var probs(Tape& t, Var h_a, Var h_b, bool training, std::mt19937_64* rng) const {
    if (static_cast<int>(t.val(h_a).numel()) != d || static_cast<int>(t.val(h_b).numel()) != d)
      throw dim_error("pair head: inputs must have length " + std::to_string(d));
    const bool drop = use_dropout && training;
    Var xa = drop ? detail::maybe_dropout(t, h_a, dropout_rate, true, rng) : h_a;
    Var xb = drop ? detail::maybe_dropout(t, h_b, dropout_rate, true, rng) : h_b;
    Var dif = t.abs_(t.sub(xa, xb));
    Var prod = t.hadamard(xa, xb);
    Var pre = t.add(t.add(t.matvec(t.param(*Wp), dif), t.matvec(t.param(*Wx), prod)),
                    t.param(*b));
    Var hid = t.sigmoid_(pre);
    if (drop) hid = detail::maybe_dropout(t, hid, dropout_rate, true, rng);
    return t.softmax_(t.affine(t.param(*Wout), hid, t.param(*bout)));
  }

  Tensor score_vector() const {
    Tensor r({static_cast<std::size_t>(m)});
    for (int k = 0; k < m; ++k) r[static_cast<std::size_t>(k)] = k + 1;
    return r;
  }

  double expected_score(const Tensor& p) const {
    double y = 0.0;
    for (int k = 0; k < m; ++k) y += (k + 1) * p[static_cast<std::size_t>(k)];
    return y;
  }
};

}  // namespace treecp
