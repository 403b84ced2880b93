#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "treecp/model.hpp"
#include "treecp/optim.hpp"

namespace treecp {

// ---------------------------------------------------------------------------
// losses (value-level; the tape carries the differentiable versions)

namespace detail {
inline void check_distribution(const Tensor& p, const char* who) {
  double sum = 0.0;
  for (double v : p.data) {
    if (v < 0.0) throw usage_error(std::string(who) + ": negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw usage_error(std::string(who) + ": input does not sum to 1");
}
}  // namespace detail

inline double loss_ce(const Tensor& p, std::size_t target) {
  detail::check_distribution(p, "loss_ce");
  if (target >= p.numel()) throw usage_error("loss_ce: target out of range");
  return -std::log(p[target]);
}

inline double loss_kl(const Tensor& p, const Tensor& q) {
  detail::check_distribution(p, "loss_kl");
  detail::check_distribution(q, "loss_kl");
  double s = 0.0;
  for (std::size_t i = 0; i < q.numel(); ++i)
    if (q[i] > 0.0) s += q[i] * (std::log(q[i]) - std::log(p[i]));
  return s;
}

// ---------------------------------------------------------------------------
// metrics

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // zero variance on either side
};

inline PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw usage_error("pearson: size mismatch or empty");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  if (vx <= 0.0 || vy <= 0.0) return {0.0, true};
  return {cov / std::sqrt(vx * vy), false};
}

struct EvalResult {
  std::string metric;
  double value = 0.0;
  bool degenerate = false;
};

inline EvalResult evaluate(Model& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw usage_error("evaluate: empty split");
  if (model.cfg.data.task == Task::sick_r) {
    std::vector<double> pred, gold;
    pred.reserve(examples.size());
    for (const Example& e : examples) {
      pred.push_back(model.predict_score(e));
      gold.push_back(e.score_target);
    }
    const PearsonResult p = pearson(pred, gold);
    return {"pearson", p.r, p.degenerate};
  }
  std::size_t correct = 0;
  for (const Example& e : examples)
    if (model.predict_class(e) == e.class_target) ++correct;
  return {"accuracy", static_cast<double>(correct) / static_cast<double>(examples.size()), false};
}

// ---------------------------------------------------------------------------
// training loop

struct MetricRow {
  int epoch;
  std::string split;
  std::string metric;
  double value;
};

struct TrainResult {
  std::vector<MetricRow> rows;
  int best_epoch = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  double test_value = 0.0;
  bool has_test = false;
  int epochs_run = 0;
  std::string metric;
};

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "epoch,split,metric,value\n";
  for (const MetricRow& r : rows)
    out += std::to_string(r.epoch) + "," + r.split + "," + r.metric + "," +
           fmt_double(r.value) + "\n";
  return out;
}

// Mini-batch loop: gradients accumulate over the batch (mean), one clipped
// optimizer step per batch. Early stopping tracks the dev metric; the
// best-dev parameter snapshot is restored before the test evaluation. An
// empty dev split falls back to the training split.
inline TrainResult train_run(Model& model, const DatasetBundle& data) {
  const RunConfig& cfg = model.cfg;
  if (data.train.empty()) throw usage_error("train_run: empty training split");
  const std::vector<Example>& dev = data.dev.empty() ? data.train : data.dev;

  AdaDelta adadelta(cfg.adadelta_rho, cfg.adadelta_eps);
  Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::mt19937_64 rng(cfg.seed);

  TrainResult res;
  std::vector<Tensor> best_snapshot;
  int since_best = 0;

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    const std::size_t bs = std::max(1, cfg.bs);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      model.store.zero_grads();
      for (std::size_t k = start; k < end; ++k) {
        const Example& e = data.train[order[k]];
        Tape tape;
        Var loss = model.example_loss(tape, e, rng);
        const double lv = tape.val(loss)[0];
        if (!std::isfinite(lv))
          throw divergence_error("non-finite loss at epoch " + std::to_string(epoch) +
                                 ", example " + std::to_string(order[k]));
        epoch_loss += lv;
        tape.backward(loss);
        tape.accumulate_param_grads(1.0 / static_cast<double>(end - start));
      }
      clip_gradients(model.store, cfg.clip_norm);
      if (cfg.optimizer == OptimizerKind::adadelta)
        adadelta.step(model.store);
      else
        adam.step(model.store);
    }
    res.epochs_run = epoch;
    res.rows.push_back({epoch, "train", "loss",
                        epoch_loss / static_cast<double>(data.train.size())});
    const EvalResult tr = evaluate(model, data.train);
    res.metric = tr.metric;
    res.rows.push_back({epoch, "train", tr.metric, tr.value});
    const EvalResult dv = evaluate(model, dev);
    res.rows.push_back({epoch, "dev", dv.metric, dv.value});

    if (dv.value > res.best_val) {
      res.best_val = dv.value;
      res.best_epoch = epoch;
      since_best = 0;
      best_snapshot.clear();
      for (std::size_t i = 0; i < model.store.size(); ++i)
        best_snapshot.push_back(model.store[i].value);
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  if (!best_snapshot.empty())
    for (std::size_t i = 0; i < model.store.size(); ++i)
      model.store[i].value = best_snapshot[i];

  if (!data.test.empty()) {
    const EvalResult te = evaluate(model, data.test);
    res.test_value = te.value;
    res.has_test = true;
    res.rows.push_back({res.best_epoch, "test", te.metric, te.value});
  }
  return res;
}

// ---------------------------------------------------------------------------
// grid search per the model-selection protocol

struct GridAxes {
  std::vector<int> bs;    // gridded under AdaDelta
  std::vector<double> lr;  // gridded under Adam (batch size stays fixed)
  std::vector<int> d, r, s;
};

struct GridCell {
  RunConfig cfg;
  double val = 0.0;
};

struct GridOutcome {
  std::vector<GridCell> cells;  // enumeration order: bs|lr, d, r, s
  std::size_t best = 0;
  std::vector<double> repeat_test;
  double mean = 0.0;
  double stddev = 0.0;
  std::string metric;
};

namespace detail {

template <typename Fn>
inline void run_indexed(std::size_t count, int jobs, Fn fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Cross product of the grid axes over the base config. Exactly one of bs/lr
// is gridded: the learning rate under Adam (batch size stays fixed), the
// batch size under AdaDelta. The rank axis only applies to CP variants.
// Enumeration order: bs|lr, then d, r, s.
inline std::vector<RunConfig> enumerate_grid(const RunConfig& base, GridAxes axes) {
  const bool cp = base.variant == CellVariant::binary_cp ||
                  base.variant == CellVariant::invariant_cp;
  if (axes.d.empty()) axes.d = {base.d};
  if (axes.s.empty()) axes.s = {base.s};
  if (!cp || axes.r.empty()) axes.r = {base.r};
  const bool grid_lr = base.optimizer == OptimizerKind::adam;
  if (grid_lr && axes.lr.empty()) axes.lr = {base.lr};
  if (!grid_lr && axes.bs.empty()) axes.bs = {base.bs};

  std::vector<RunConfig> cells;
  const std::size_t first_axis = grid_lr ? axes.lr.size() : axes.bs.size();
  for (std::size_t a = 0; a < first_axis; ++a)
    for (int dv : axes.d)
      for (int rv : axes.r)
        for (int sv : axes.s) {
          RunConfig c = base;
          if (grid_lr)
            c.lr = axes.lr[a];
          else
            c.bs = axes.bs[a];
          c.d = dv;
          c.r = rv;
          c.s = sv;
          cells.push_back(c);
        }
  return cells;
}

// Strict improvement only, so ties keep the first in enumeration order.
inline std::size_t select_best(const std::vector<double>& vals) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < vals.size(); ++i)
    if (vals[i] > vals[best]) best = i;
  return best;
}

// Trains every combination, selects by validation metric (ties keep the
// first in enumeration order), then retrains the winner over `repeats` seeds
// and reports mean (std) of the test metric.
inline GridOutcome grid_search(const RunConfig& base, GridAxes axes, const DatasetBundle& data,
                               const Vocabulary& vocab, int repeats, int jobs = 1) {
  GridOutcome out;
  for (RunConfig& c : enumerate_grid(base, std::move(axes))) out.cells.push_back({c, 0.0});
  out.metric = base.data.task == Task::sick_r ? "pearson" : "accuracy";

  detail::run_indexed(out.cells.size(), jobs, [&](std::size_t i) {
    Model m = Model::create(out.cells[i].cfg, vocab);
    TrainResult tr = train_run(m, data);
    out.cells[i].val = tr.best_val;
  });

  std::vector<double> vals;
  for (const GridCell& c : out.cells) vals.push_back(c.val);
  out.best = select_best(vals);

  out.repeat_test.assign(static_cast<std::size_t>(std::max(1, repeats)), 0.0);
  detail::run_indexed(out.repeat_test.size(), jobs, [&](std::size_t i) {
    RunConfig c = out.cells[out.best].cfg;
    c.seed = base.seed + i;
    Model m = Model::create(c, vocab);
    TrainResult tr = train_run(m, data);
    out.repeat_test[i] = tr.has_test ? tr.test_value : tr.best_val;
  });

  double sum = 0.0;
  for (double v : out.repeat_test) sum += v;
  out.mean = sum / static_cast<double>(out.repeat_test.size());
  if (out.repeat_test.size() > 1) {
    double ss = 0.0;
    for (double v : out.repeat_test) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(out.repeat_test.size() - 1));
  }
  return out;
}

// Result-table score cell, "mean (std)" with scores scaled by 100.
inline std::string table_row(const GridOutcome& g) {
  return fmt_fixed(g.mean * 100.0, 1) + " (" + fmt_fixed(g.stddev * 100.0, 1) + ")";
}

// ---------------------------------------------------------------------------
// analysis reports

struct LengthBucket {
  std::size_t lo = 0, hi = 0;  // [lo, hi)
  std::size_t count = 0, correct = 0;

  double accuracy() const {
    return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0;
  }
};

namespace detail {
inline std::size_t word_leaf_count(const Tree& t) {
  std::size_t n = 0;
  for (const Node& nd : t.nodes)
    if (nd.word) ++n;
  return n;
}
}  // namespace detail

// Accuracy bucketed by the longer sentence of each pair.
inline std::vector<LengthBucket> length_bucket_report(Model& model,
                                                      const std::vector<Example>& examples,
                                                      std::size_t bucket_width = 5) {
  if (model.cfg.data.task != Task::sick_e)
    throw usage_error("length-buckets requires an entailment (sick_e) checkpoint");
  if (bucket_width == 0) throw usage_error("length-buckets: bucket width must be positive");
  std::map<std::size_t, LengthBucket> buckets;
  for (const Example& e : examples) {
    const std::size_t len = std::max(detail::word_leaf_count(e.tree_a),
                                     detail::word_leaf_count(*e.tree_b));
    const std::size_t lo = (len / bucket_width) * bucket_width;
    LengthBucket& b = buckets[lo];
    b.lo = lo;
    b.hi = lo + bucket_width;
    ++b.count;
    if (model.predict_class(e) == e.class_target) ++b.correct;
  }
  std::vector<LengthBucket> out;
  for (auto& [lo, b] : buckets) out.push_back(b);
  return out;
}

struct NodeProbeRow {
  NodeId node;
  Tensor dist;
};

// Per-node prediction trace: feeds the pair head with the hidden states of
// the same node id in both prepared trees, for each id on the path.
inline std::vector<NodeProbeRow> node_probe(Model& model, const Tree& raw_a, const Tree& raw_b,
                                            const std::vector<NodeId>& path) {
  if (!model.is_pair()) throw usage_error("node-probe requires a pair-task checkpoint");
  const TreeForm form = form_for_variant(model.cfg.variant);
  const Tree a = prepare_tree(raw_a, form, model.cfg.cnf_direction);
  const Tree b = prepare_tree(raw_b, form, model.cfg.cnf_direction);
  if (a.size() != b.size())
    throw usage_error("node-probe: trees are not structurally corresponding (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " nodes)");
  for (NodeId id : path)
    if (id < 0 || static_cast<std::size_t>(id) >= a.size())
      throw usage_error("node-probe: node id " + std::to_string(id) + " out of range");

  Tape t;
  EncodedTree ea = model.encode(t, a);
  EncodedTree eb = model.encode(t, b);
  std::vector<NodeProbeRow> rows;
  for (NodeId id : path) {
    Var p = model.pair.probs(t, ea.states[static_cast<std::size_t>(id)].h,
                             eb.states[static_cast<std::size_t>(id)].h, false, nullptr);
    rows.push_back({id, t.val(p)});
  }
  return rows;
}

}  // namespace treecp
