#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "treecp/tape.hpp"
#include "treecp/tree.hpp"

namespace treecp {

enum class CellVariant { binary_sum, child_sum, treenet, binary_cp, invariant_cp };

enum class UpdateActivation { sigmoid, tanh };

inline bool is_binary_variant(CellVariant v) {
  return v == CellVariant::binary_sum || v == CellVariant::binary_cp ||
         v == CellVariant::treenet;
}

// Tree form each composition function consumes.
enum class TreeForm { nonbinary, binary, treenet };

inline TreeForm form_for_variant(CellVariant v) {
  switch (v) {
    case CellVariant::binary_sum:
    case CellVariant::binary_cp:
      return TreeForm::binary;
    case CellVariant::treenet:
      return TreeForm::treenet;
    default:
      return TreeForm::nonbinary;
  }
}

struct CellConfig {
  CellVariant variant = CellVariant::invariant_cp;
  int d = 0;  // hidden/memory width
  int n = 0;  // word-vector width
  int r = 0;  // decomposition rank (CP variants)
  UpdateActivation update_activation = UpdateActivation::sigmoid;
  int sum_arity = 2;   // L of the L-ary Sum-LSTM generalization
  int max_arity = 0;   // 0 = unbounded; cap for child-sum / invariant encoders
};

namespace detail {

inline Param& wire_param(ParamStore& st, const std::string& name,
                         std::vector<std::size_t> shape, std::mt19937_64* rng,
                         std::size_t fan_in, double fill = 0.0) {
  if (rng) {
    Param& p = st.add(name, Tensor(shape));
    if (fan_in > 0)
      init_uniform(p.value, fan_in, *rng);
    else
      p.value.fill(fill);
    return p;
  }
  Param& p = st.at(name);
  if (p.value.shape != shape)
    throw usage_error("parameter " + name + " has shape " + p.value.shape_str() +
                      ", expected " + Tensor(shape).shape_str());
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// parameter groups

struct LeafParams {
  Param *Wi, *Wo, *Wu;
  Param *bi, *bo, *bu;
};

// sigma(sum_j U_j h_j + b) over positional inputs.
struct AffineGate {
  std::vector<Param*> U;
  Param* b;
};

// One decomposed multi-affine gate; factors are homogeneous (d+1) x r.
struct CpGate {
  std::vector<Param*> factors;
  Param* Q;  // {r, d}
  Param* q;  // {d}
  bool shared = false;

  Param* factor(std::size_t mode) const { return shared ? factors[0] : factors[mode]; }
};

struct BinarySumCell {
  AffineGate i, o, u;            // U per child position
  std::vector<AffineGate> f;     // one gate per child position
};

struct ChildSumCell {
  AffineGate i, o, u, f;  // single U each; f applied per child
};

struct TreenetCell {
  AffineGate o, f_s, f_c;  // U = {U_sibling, U_child} each; no input/update gate
};

struct BinaryCpCell {
  CpGate i, o, u, f_l, f_r;
};

struct InvariantCpCell {
  CpGate i, o, u;  // shared input factors
  AffineGate f;    // plain affine forget, shared across children
};

using CellImpl =
    std::variant<BinarySumCell, ChildSumCell, TreenetCell, BinaryCpCell, InvariantCpCell>;

// Full parameter set of one composition-cell type, backed by a ParamStore.
struct CellParams {
  CellConfig cfg;
  LeafParams leaf;
  CellImpl impl;

  // rng != nullptr registers and initializes parameters; nullptr binds to an
  // existing store (checkpoint load). Registration order is fixed so seeded
  // runs are reproducible.
  static CellParams wire(ParamStore& st, const CellConfig& cfg, std::mt19937_64* rng);
  static CellParams create(ParamStore& st, const CellConfig& cfg, std::mt19937_64& rng) {
    return wire(st, cfg, &rng);
  }
  static CellParams bind(ParamStore& st, const CellConfig& cfg) { return wire(st, cfg, nullptr); }
};

namespace detail {

inline AffineGate wire_affine_gate(ParamStore& st, const std::string& base, std::size_t inputs,
                                   std::size_t d, std::mt19937_64* rng, double bias_fill) {
  AffineGate g;
  for (std::size_t j = 0; j < inputs; ++j) {
    const std::string name =
        inputs == 1 ? base + ".U" : base + ".U" + std::to_string(j + 1);
    g.U.push_back(&wire_param(st, name, {d, d}, rng, d));
  }
  g.b = &wire_param(st, base + ".b", {d}, rng, 0, bias_fill);
  return g;
}

inline AffineGate wire_pair_gate(ParamStore& st, const std::string& base, std::size_t d,
                                 std::mt19937_64* rng, double bias_fill) {
  AffineGate g;
  g.U.push_back(&wire_param(st, base + ".Us", {d, d}, rng, d));
  g.U.push_back(&wire_param(st, base + ".Uc", {d, d}, rng, d));
  g.b = &wire_param(st, base + ".b", {d}, rng, 0, bias_fill);
  return g;
}

inline CpGate wire_cp_gate(ParamStore& st, const std::string& base, std::size_t modes,
                           bool shared, std::size_t d, std::size_t r, std::mt19937_64* rng,
                           double bias_fill) {
  CpGate g;
  g.shared = shared;
  const std::size_t stored = shared ? 1 : modes;
  for (std::size_t j = 0; j < stored; ++j) {
    std::string name = base + ".U";
    if (!shared) name += (j == 0 ? "l" : "r");
    g.factors.push_back(&wire_param(st, name, {d + 1, r}, rng, d + 1));
  }
  g.Q = &wire_param(st, base + ".Q", {r, d}, rng, r);
  g.q = &wire_param(st, base + ".q", {d}, rng, 0, bias_fill);
  return g;
}

}  // namespace detail

inline CellParams CellParams::wire(ParamStore& st, const CellConfig& cfg, std::mt19937_64* rng) {
  using detail::wire_affine_gate;
  using detail::wire_cp_gate;
  using detail::wire_pair_gate;
  using detail::wire_param;

  const std::size_t d = static_cast<std::size_t>(cfg.d);
  const std::size_t n = static_cast<std::size_t>(cfg.n);
  const std::size_t r = static_cast<std::size_t>(cfg.r);

  CellParams p;
  p.cfg = cfg;
  p.leaf.Wi = &wire_param(st, "leaf.W_i", {d, n}, rng, n);
  p.leaf.Wo = &wire_param(st, "leaf.W_o", {d, n}, rng, n);
  p.leaf.Wu = &wire_param(st, "leaf.W_u", {d, n}, rng, n);
  p.leaf.bi = &wire_param(st, "leaf.b_i", {d}, rng, 0);
  p.leaf.bo = &wire_param(st, "leaf.b_o", {d}, rng, 0);
  p.leaf.bu = &wire_param(st, "leaf.b_u", {d}, rng, 0);

  switch (cfg.variant) {
    case CellVariant::binary_sum: {
      BinarySumCell c;
      const std::size_t L = static_cast<std::size_t>(cfg.sum_arity);
      c.i = wire_affine_gate(st, "cell.i", L, d, rng, 0.0);
      c.o = wire_affine_gate(st, "cell.o", L, d, rng, 0.0);
      c.u = wire_affine_gate(st, "cell.u", L, d, rng, 0.0);
      for (std::size_t k = 0; k < L; ++k)
        c.f.push_back(
            wire_affine_gate(st, "cell.f" + std::to_string(k + 1), L, d, rng, 1.0));
      p.impl = std::move(c);
      break;
    }
    case CellVariant::child_sum: {
      ChildSumCell c;
      c.i = wire_affine_gate(st, "cell.i", 1, d, rng, 0.0);
      c.o = wire_affine_gate(st, "cell.o", 1, d, rng, 0.0);
      c.u = wire_affine_gate(st, "cell.u", 1, d, rng, 0.0);
      c.f = wire_affine_gate(st, "cell.f", 1, d, rng, 1.0);
      p.impl = std::move(c);
      break;
    }
    case CellVariant::treenet: {
      TreenetCell c;
      c.o = wire_pair_gate(st, "cell.o", d, rng, 0.0);
      c.f_s = wire_pair_gate(st, "cell.fs", d, rng, 1.0);
      c.f_c = wire_pair_gate(st, "cell.fc", d, rng, 1.0);
      p.impl = std::move(c);
      break;
    }
    case CellVariant::binary_cp: {
      BinaryCpCell c;
      c.i = wire_cp_gate(st, "cell.i", 2, false, d, r, rng, 0.0);
      c.o = wire_cp_gate(st, "cell.o", 2, false, d, r, rng, 0.0);
      c.u = wire_cp_gate(st, "cell.u", 2, false, d, r, rng, 0.0);
      c.f_l = wire_cp_gate(st, "cell.fl", 2, false, d, r, rng, 1.0);
      c.f_r = wire_cp_gate(st, "cell.fr", 2, false, d, r, rng, 1.0);
      p.impl = std::move(c);
      break;
    }
    case CellVariant::invariant_cp: {
      InvariantCpCell c;
      c.i = wire_cp_gate(st, "cell.i", 1, true, d, r, rng, 0.0);
      c.o = wire_cp_gate(st, "cell.o", 1, true, d, r, rng, 0.0);
      c.u = wire_cp_gate(st, "cell.u", 1, true, d, r, rng, 0.0);
      c.f = wire_affine_gate(st, "cell.f", 1, d, rng, 1.0);
      p.impl = std::move(c);
      break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// forward passes

namespace detail {

inline Var update_act(Tape& t, Var x, UpdateActivation a) {
  return a == UpdateActivation::sigmoid ? t.sigmoid_(x) : t.tanh_(x);
}

inline Var affine_gate_pre(Tape& t, const AffineGate& g, std::span<const Var> hs) {
  Var acc = t.matvec(t.param(*g.U[0]), hs[0]);
  for (std::size_t j = 1; j < hs.size(); ++j)
    acc = t.add(acc, t.matvec(t.param(*g.U[j]), hs[j]));
  return t.add(acc, t.param(*g.b));
}

// Single-U gate applied to one vector (child-sum style).
inline Var shared_gate_pre(Tape& t, const AffineGate& g, Var h) {
  return t.add(t.matvec(t.param(*g.U[0]), h), t.param(*g.b));
}

inline Var cp_gate_pre(Tape& t, const CpGate& g, std::span<const Var> hs) {
  if (!g.shared && hs.size() != g.factors.size())
    throw usage_error("cp gate: expected " + std::to_string(g.factors.size()) +
                      " inputs, got " + std::to_string(hs.size()));
  Var e = t.mode_apply(t.param(*g.factor(0)), hs[0]);
  for (std::size_t k = 1; k < hs.size(); ++k)
    e = t.hadamard(e, t.mode_apply(t.param(*g.factor(k)), hs[k]));
  return t.proj(t.param(*g.Q), e, t.param(*g.q));
}

}  // namespace detail

// Leaf transform, shared by every variant: both the update value and the
// gates use the configured activation's printed form (sigma by default).
inline State leaf_cell(Tape& t, const CellParams& p, Var x) {
  Var i = t.sigmoid_(t.affine(t.param(*p.leaf.Wi), x, t.param(*p.leaf.bi)));
  Var o = t.sigmoid_(t.affine(t.param(*p.leaf.Wo), x, t.param(*p.leaf.bo)));
  Var u = detail::update_act(t, t.affine(t.param(*p.leaf.Wu), x, t.param(*p.leaf.bu)),
                             p.cfg.update_activation);
  Var c = t.hadamard(i, u);
  Var h = t.hadamard(o, t.tanh_(c));
  return {h, c};
}

inline State binary_sum_cell(Tape& t, const CellParams& p, State left, State right) {
  const auto* c = std::get_if<BinarySumCell>(&p.impl);
  if (!c) throw usage_error("binary_sum_cell: params are not a Binary Sum-LSTM");
  if (c->f.size() != 2) throw usage_error("binary_sum_cell: cell arity is not 2");
  const Var hs[2] = {left.h, right.h};
  Var i = t.sigmoid_(detail::affine_gate_pre(t, c->i, hs));
  Var o = t.sigmoid_(detail::affine_gate_pre(t, c->o, hs));
  Var u = detail::update_act(t, detail::affine_gate_pre(t, c->u, hs), p.cfg.update_activation);
  Var fl = t.sigmoid_(detail::affine_gate_pre(t, c->f[0], hs));
  Var fr = t.sigmoid_(detail::affine_gate_pre(t, c->f[1], hs));
  Var cell = t.add(t.hadamard(i, u),
                   t.add(t.hadamard(fl, left.c), t.hadamard(fr, right.c)));
  Var h = t.hadamard(o, t.tanh_(cell));
  return {h, cell};
}

inline State child_sum_cell(Tape& t, const CellParams& p, std::span<const State> children) {
  const auto* c = std::get_if<ChildSumCell>(&p.impl);
  if (!c) throw usage_error("child_sum_cell: params are not a Child-Sum LSTM");
  if (children.empty()) throw usage_error("child_sum_cell: no children (leaves use leaf_cell)");
  Var hsum = children[0].h;
  for (std::size_t k = 1; k < children.size(); ++k) hsum = t.add(hsum, children[k].h);
  Var i = t.sigmoid_(detail::shared_gate_pre(t, c->i, hsum));
  Var o = t.sigmoid_(detail::shared_gate_pre(t, c->o, hsum));
  Var u = detail::update_act(t, detail::shared_gate_pre(t, c->u, hsum), p.cfg.update_activation);
  Var cell = t.hadamard(i, u);
  for (const State& ch : children) {
    Var fk = t.sigmoid_(detail::shared_gate_pre(t, c->f, ch.h));
    cell = t.add(cell, t.hadamard(fk, ch.c));
  }
  Var h = t.hadamard(o, t.tanh_(cell));
  return {h, cell};
}

// No input gate and no update value: the memory cell is a pure forget mix of
// the left sibling and the rightmost child.
inline State treenet_cell(Tape& t, const CellParams& p, State sibling, State child) {
  const auto* c = std::get_if<TreenetCell>(&p.impl);
  if (!c) throw usage_error("treenet_cell: params are not a TreeNet cell");
  const Var hs[2] = {sibling.h, child.h};
  Var o = t.sigmoid_(detail::affine_gate_pre(t, c->o, hs));
  Var fs = t.sigmoid_(detail::affine_gate_pre(t, c->f_s, hs));
  Var fc = t.sigmoid_(detail::affine_gate_pre(t, c->f_c, hs));
  Var cell = t.add(t.hadamard(fs, sibling.c), t.hadamard(fc, child.c));
  Var h = t.hadamard(o, t.tanh_(cell));
  return {h, cell};
}

inline State binary_cp_cell(Tape& t, const CellParams& p, State left, State right) {
  const auto* c = std::get_if<BinaryCpCell>(&p.impl);
  if (!c) throw usage_error("binary_cp_cell: params are not a Binary CP-LSTM");
  const Var hs[2] = {left.h, right.h};
  Var i = t.sigmoid_(detail::cp_gate_pre(t, c->i, hs));
  Var o = t.sigmoid_(detail::cp_gate_pre(t, c->o, hs));
  Var u = detail::update_act(t, detail::cp_gate_pre(t, c->u, hs), p.cfg.update_activation);
  Var fl = t.sigmoid_(detail::cp_gate_pre(t, c->f_l, hs));
  Var fr = t.sigmoid_(detail::cp_gate_pre(t, c->f_r, hs));
  Var cell = t.add(t.hadamard(i, u),
                   t.add(t.hadamard(fl, left.c), t.hadamard(fr, right.c)));
  Var h = t.hadamard(o, t.tanh_(cell));
  return {h, cell};
}

inline State invariant_cp_cell(Tape& t, const CellParams& p, std::span<const State> children) {
  const auto* c = std::get_if<InvariantCpCell>(&p.impl);
  if (!c) throw usage_error("invariant_cp_cell: params are not an Invariant CP-LSTM");
  if (children.empty())
    throw usage_error("invariant_cp_cell: no children (leaves use leaf_cell)");
  std::vector<Var> hs;
  hs.reserve(children.size());
  for (const State& ch : children) hs.push_back(ch.h);
  Var i = t.sigmoid_(detail::cp_gate_pre(t, c->i, hs));
  Var o = t.sigmoid_(detail::cp_gate_pre(t, c->o, hs));
  Var u = detail::update_act(t, detail::cp_gate_pre(t, c->u, hs), p.cfg.update_activation);
  Var cell = t.hadamard(i, u);
  for (const State& ch : children) {
    Var fk = t.sigmoid_(detail::shared_gate_pre(t, c->f, ch.h));
    cell = t.add(cell, t.hadamard(fk, ch.c));
  }
  Var h = t.hadamard(o, t.tanh_(cell));
  return {h, cell};
}

inline State compose(Tape& t, const CellParams& p, std::span<const State> children) {
  if (p.cfg.max_arity > 0 &&
      children.size() > static_cast<std::size_t>(p.cfg.max_arity))
    throw usage_error("compose: node out-degree " + std::to_string(children.size()) +
                      " exceeds configured cap " + std::to_string(p.cfg.max_arity));
  switch (p.cfg.variant) {
    case CellVariant::binary_sum:
      if (children.size() != 2)
        throw usage_error("binary Sum-LSTM requires out-degree 2, got " +
                          std::to_string(children.size()));
      return binary_sum_cell(t, p, children[0], children[1]);
    case CellVariant::binary_cp:
      if (children.size() != 2)
        throw usage_error("binary CP-LSTM requires out-degree 2, got " +
                          std::to_string(children.size()));
      return binary_cp_cell(t, p, children[0], children[1]);
    case CellVariant::treenet:
      if (children.size() != 2)
        throw usage_error("TreeNet requires the sibling-chain transform (out-degree 2), got " +
                          std::to_string(children.size()));
      return treenet_cell(t, p, children[0], children[1]);
    case CellVariant::child_sum:
      return child_sum_cell(t, p, children);
    case CellVariant::invariant_cp:
      return invariant_cp_cell(t, p, children);
  }
  throw usage_error("compose: unknown variant");
}

// ---------------------------------------------------------------------------
// tree encoder

using EmbeddingFn = std::function<Var(Tape&, const std::string&)>;

struct EncodedTree {
  std::vector<State> states;  // indexed by node id
  NodeId root = -1;

  const State& root_state() const { return states[static_cast<std::size_t>(root)]; }
};

namespace detail {

inline State encode_node(Tape& t, const Tree& tree, NodeId id, const CellParams& p,
                         const EmbeddingFn& emb, std::vector<State>& states) {
  const Node& n = tree.at(id);
  State s;
  if (n.bottom) {
    const std::vector<std::size_t> shape{static_cast<std::size_t>(p.cfg.d)};
    s = State{t.zeros(shape), t.zeros(shape)};
  } else if (n.is_leaf()) {
    if (!n.word) throw usage_error("encode_tree: leaf node " + std::to_string(id) + " has no word");
    s = leaf_cell(t, p, emb(t, *n.word));
  } else {
    std::vector<State> kids;
    kids.reserve(n.children.size());
    for (NodeId c : n.children) kids.push_back(encode_node(t, tree, c, p, emb, states));
    s = compose(t, p, kids);
  }
  states[static_cast<std::size_t>(id)] = s;
  return s;
}

}  // namespace detail

// Bottom-up sweep: leaves through the leaf transform on embedded words,
// internal nodes through the variant cell, bottom pads as zero states.
inline EncodedTree encode_tree(Tape& t, const Tree& tree, const CellParams& p,
                               const EmbeddingFn& emb) {
  if (tree.root < 0) throw usage_error("encode_tree: empty tree");
  EncodedTree enc;
  enc.root = tree.root;
  enc.states.resize(tree.size());
  detail::encode_node(t, tree, tree.root, p, emb, enc.states);
  return enc;
}

// ---------------------------------------------------------------------------
// parameter accounting

struct ParamCount {
  std::size_t leaf = 0;
  std::size_t composition = 0;
  std::size_t head = 0;
  std::size_t embedding = 0;

  std::size_t total() const { return leaf + composition + head + embedding; }
};

inline ParamCount param_count(const ParamStore& st) {
  ParamCount c;
  c.leaf = st.scalar_count_prefix("leaf.");
  c.composition = st.scalar_count_prefix("cell.");
  c.head = st.scalar_count_prefix("head.");
  c.embedding = st.scalar_count_prefix("embedding.");
  return c;
}

// Exact scalar count for a cell configuration, by enumeration.
inline ParamCount param_count(const CellConfig& cfg) {
  ParamStore scratch;
  std::mt19937_64 rng(0);
  CellParams::create(scratch, cfg, rng);
  return param_count(scratch);
}

}  // namespace treecp
