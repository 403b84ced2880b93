#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracles.hpp"
#include "treecp/model.hpp"
#include "treecp/synthetic.hpp"
#include "treecp/train.hpp"

using namespace treecp;

namespace {

std::string scratch_dir() {
  static const std::string dir =
      (std::filesystem::temp_directory_path() / "treecp_train_tests").string();
  std::filesystem::create_directories(dir);
  return dir;
}

// Scalar AdaDelta reference, transcribed independently of the optimizer.
struct ScalarAdaDelta {
  double rho, eps, eg2 = 0.0, edx2 = 0.0;
  double step(double g) {
    eg2 = rho * eg2 + (1 - rho) * g * g;
    const double dx = -std::sqrt(edx2 + eps) / std::sqrt(eg2 + eps) * g;
    edx2 = rho * edx2 + (1 - rho) * dx * dx;
    return dx;
  }
};

struct ScalarAdam {
  double lr, b1, b2, eps, m = 0.0, v = 0.0;
  long t = 0;
  double step(double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return -lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("adadelta: zero gradients leave parameters unchanged, accumulators decay") {
  ParamStore st;
  Param& p = st.add("w", Tensor::from({1.0, -2.0}));
  AdaDelta opt(0.95, 1e-6);
  p.grad = Tensor::from({1.0, 0.5});
  opt.step(st);
  const Tensor moved = p.value;
  p.grad.zero();
  opt.step(st);
  REQUIRE(linf_distance(p.value, moved) == 0.0);
}

TEST_CASE("adadelta single-scalar step matches the reference implementation") {
  ParamStore st;
  Param& p = st.add("w", Tensor::from({2.0}));
  AdaDelta opt(0.95, 1e-6);
  ScalarAdaDelta ref{0.95, 1e-6};
  double x = 2.0;
  for (double g : {1.0, -0.3, 0.8, 0.0, 2.5}) {
    p.grad[0] = g;
    opt.step(st);
    x += ref.step(g);
    REQUIRE(p.value[0] == Catch::Approx(x).margin(1e-15));
  }
  // first-step magnitude: sqrt(eps) / sqrt(0.05 + eps)
  ParamStore st2;
  Param& q = st2.add("w", Tensor::from({0.0}));
  AdaDelta opt2(0.95, 1e-6);
  q.grad[0] = 1.0;
  opt2.step(st2);
  const double expect = std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  REQUIRE(std::abs(q.value[0]) == Catch::Approx(expect));
}

TEST_CASE("adadelta: identical tensors with identical gradients move identically") {
  ParamStore st;
  Param& a = st.add("a", Tensor::from({0.5, 0.5}));
  Param& b = st.add("b", Tensor::from({0.5, 0.5}));
  AdaDelta opt;
  a.grad = Tensor::from({0.2, -0.4});
  b.grad = Tensor::from({0.2, -0.4});
  opt.step(st);
  REQUIRE(linf_distance(a.value, b.value) == 0.0);
}

TEST_CASE("adam: zero start is a no-op, first step is ~ -lr, decay closed form") {
  ParamStore st;
  Param& p = st.add("w", Tensor::from({1.0}));
  Adam opt(0.001, 0.9, 0.999, 1e-8);
  p.grad[0] = 0.0;
  opt.step(st);
  REQUIRE(p.value[0] == 1.0);

  ParamStore st2;
  Param& q = st2.add("w", Tensor::from({0.0}));
  Adam opt2(0.001, 0.9, 0.999, 1e-8);
  ScalarAdam ref{0.001, 0.9, 0.999, 1e-8};
  q.grad[0] = 1.0;
  opt2.step(st2);
  REQUIRE(q.value[0] == Catch::Approx(ref.step(1.0)).margin(1e-18));
  REQUIRE(q.value[0] == Catch::Approx(-0.001).margin(1e-9));

  // k zero-gradient steps after one unit gradient: m decays as b1^k
  for (int k = 0; k < 5; ++k) {
    q.grad[0] = 0.0;
    opt2.step(st2);
    ref.step(0.0);
  }
  REQUIRE(q.value[0] == Catch::Approx(0.0 + [&] {
            double x = 0.0;
            ScalarAdam r{0.001, 0.9, 0.999, 1e-8};
            x += r.step(1.0);
            for (int k = 0; k < 5; ++k) x += r.step(0.0);
            return x;
          }()).margin(1e-15));
}

TEST_CASE("losses: closed forms and the summation oracle") {
  Tensor onehot({5});
  onehot[2] = 1.0;
  REQUIRE(loss_ce(onehot, 2) == 0.0);

  Tensor p = softmax(Tensor::from({0.3, -0.4, 1.2, 0.0, -2.0}));
  REQUIRE(loss_kl(p, p) == Catch::Approx(0.0).margin(1e-15));

  Tensor q = sparse_target(2.7, 5);
  double expect = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    if (q[i] > 0.0) expect += q[i] * (std::log(q[i]) - std::log(p[i]));
  REQUIRE(loss_kl(p, q) == Catch::Approx(expect));

  double ce = -std::log(p[3]);
  REQUIRE(loss_ce(p, 3) == Catch::Approx(ce));

  Tensor not_dist = Tensor::from({0.5, 0.2});
  REQUIRE_THROWS_AS(loss_ce(not_dist, 0), usage_error);
  REQUIRE_THROWS_AS(loss_kl(not_dist, q), usage_error);
}

TEST_CASE("pearson: perfect, degenerate, and formula oracle") {
  REQUIRE(pearson({1, 2, 3, 4}, {1, 2, 3, 4}).r == Catch::Approx(1.0));

  PearsonResult deg = pearson({2, 2, 2}, {1, 2, 3});
  REQUIRE(deg.degenerate);
  REQUIRE(deg.r == 0.0);

  std::vector<double> x = {0.3, -1.2, 0.7, 2.0, -0.5};
  std::vector<double> y = {1.1, 0.2, -0.3, 1.8, 0.9};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    mx += x[i] / 5;
    my += y[i] / 5;
  }
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  REQUIRE(pearson(x, y).r == Catch::Approx(cov / std::sqrt(vx * vy)));
}

TEST_CASE("train_run memorizes the overfit fixture") {
  const std::string dir = scratch_dir() + "/overfit";
  write_overfit_fixture(dir, 42);
  RunConfig cfg = overfit_config(CellVariant::binary_sum, dir, 1);
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  TrainResult res = train_run(m, data);
  double best = 0.0;
  for (const MetricRow& r : res.rows)
    if (r.split == "train" && r.metric == "accuracy") best = std::max(best, r.value);
  REQUIRE(best == 1.0);
  REQUIRE(res.has_test);
  REQUIRE(res.test_value == 1.0);  // test split equals the training set here
}

TEST_CASE("training loss is non-increasing early on the overfit fixture") {
  const std::string dir = scratch_dir() + "/overfit_loss";
  write_overfit_fixture(dir, 42);
  int monotone_seeds = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg = overfit_config(CellVariant::child_sum, dir, seed);
    cfg.epochs = 5;
    cfg.patience = 5;
    DatasetBundle data = load_dataset(cfg);
    Vocabulary vocab = build_vocabulary(cfg, data);
    Model m = Model::create(cfg, vocab);
    TrainResult res = train_run(m, data);
    std::vector<double> losses;
    for (const MetricRow& r : res.rows)
      if (r.split == "train" && r.metric == "loss") losses.push_back(r.value);
    bool monotone = true;
    for (std::size_t i = 1; i < losses.size(); ++i)
      monotone = monotone && losses[i] <= losses[i - 1] + 1e-12;
    if (monotone) ++monotone_seeds;
  }
  REQUIRE(monotone_seeds >= 4);
}

TEST_CASE("fixed seed reproduces the metric trace exactly") {
  const std::string dir = scratch_dir() + "/determinism";
  write_overfit_fixture(dir, 9);
  RunConfig cfg = overfit_config(CellVariant::invariant_cp, dir, 3);
  cfg.epochs = 8;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model a = Model::create(cfg, vocab);
  Model b = Model::create(cfg, vocab);
  const std::string csv_a = metrics_csv(train_run(a, data).rows);
  const std::string csv_b = metrics_csv(train_run(b, data).rows);
  REQUIRE(csv_a == csv_b);
}

TEST_CASE("patience 0 stops right after the first non-improvement") {
  const std::string dir = scratch_dir() + "/patience";
  write_overfit_fixture(dir, 5);
  RunConfig cfg = overfit_config(CellVariant::binary_sum, dir, 2);
  cfg.epochs = 50;
  cfg.patience = 0;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  TrainResult res = train_run(m, data);
  // the run ends on the first epoch whose dev metric fails to improve
  std::vector<double> dev;
  for (const MetricRow& r : res.rows)
    if (r.split == "dev") dev.push_back(r.value);
  REQUIRE(res.epochs_run == static_cast<int>(dev.size()));
  REQUIRE(res.epochs_run < 50);
  double best = -1.0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    if (i + 1 < dev.size()) REQUIRE(dev[i] > best);  // every non-final epoch improved
    else REQUIRE(dev[i] <= best);                    // the final one did not
    best = std::max(best, dev[i]);
  }
}

TEST_CASE("divergence aborts with a diagnostic") {
  const std::string dir = scratch_dir() + "/diverge";
  write_overfit_fixture(dir, 5);
  RunConfig cfg = overfit_config(CellVariant::binary_sum, dir, 2);
  cfg.epochs = 2;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  m.store.at("head.W2").value.fill(1e308);  // force a non-finite loss
  REQUIRE_THROWS_AS(train_run(m, data), divergence_error);
}

TEST_CASE("evaluate rejects an empty split") {
  const std::string dir = scratch_dir() + "/emptysplit";
  write_overfit_fixture(dir, 5);
  RunConfig cfg = overfit_config(CellVariant::binary_sum, dir, 2);
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  REQUIRE_THROWS_AS(evaluate(m, {}), usage_error);
}

TEST_CASE("grid enumeration matches the model-selection table") {
  RunConfig base;
  base.data.task = Task::sst5;
  base.optimizer = OptimizerKind::adadelta;

  GridAxes sum_axes;
  sum_axes.bs = {5, 10, 25};
  sum_axes.d = {100, 200, 300};
  sum_axes.s = {0, 500, 1000};
  base.variant = CellVariant::binary_sum;
  REQUIRE(enumerate_grid(base, sum_axes).size() == 27);

  GridAxes cp_axes = sum_axes;
  cp_axes.r = {50, 100, 150};
  base.variant = CellVariant::binary_cp;
  REQUIRE(enumerate_grid(base, cp_axes).size() == 81);

  // the rank axis is inert for non-CP variants
  base.variant = CellVariant::child_sum;
  REQUIRE(enumerate_grid(base, cp_axes).size() == 27);

  // under Adam the learning rate is gridded and the batch size stays fixed
  base.optimizer = OptimizerKind::adam;
  base.variant = CellVariant::treenet;
  GridAxes adam_axes;
  adam_axes.lr = {0.001, 0.005, 0.008};
  adam_axes.d = {150, 200, 300};
  adam_axes.s = {50, 100, 200};
  const auto cells = enumerate_grid(base, adam_axes);
  REQUIRE(cells.size() == 27);
  for (const RunConfig& c : cells) REQUIRE(c.bs == base.bs);
}

TEST_CASE("grid selection keeps the first of tied cells") {
  REQUIRE(select_best({0.5, 0.5, 0.5}) == 0);
  REQUIRE(select_best({0.1, 0.7, 0.7}) == 1);
}

TEST_CASE("grid_search with a single cell returns one run and a table row") {
  const std::string dir = scratch_dir() + "/grid1";
  write_overfit_fixture(dir, 21);
  RunConfig base = overfit_config(CellVariant::binary_sum, dir, 4);
  base.epochs = 5;
  DatasetBundle data = load_dataset(base);
  Vocabulary vocab = build_vocabulary(base, data);
  GridOutcome g = grid_search(base, {}, data, vocab, 2);
  REQUIRE(g.cells.size() == 1);
  REQUIRE(g.repeat_test.size() == 2);
  const std::string row = table_row(g);
  REQUIRE(row.find(" (") != std::string::npos);
}

TEST_CASE("parallel grid cells reproduce the sequential results") {
  const std::string dir = scratch_dir() + "/grid_jobs";
  write_overfit_fixture(dir, 27);
  RunConfig base = overfit_config(CellVariant::child_sum, dir, 6);
  base.epochs = 4;
  GridAxes axes;
  axes.bs = {1, 2};
  axes.d = {8, 12};
  DatasetBundle data = load_dataset(base);
  Vocabulary vocab = build_vocabulary(base, data);
  GridOutcome seq = grid_search(base, axes, data, vocab, 1, 1);
  GridOutcome par = grid_search(base, axes, data, vocab, 1, 2);
  REQUIRE(seq.cells.size() == 4);
  REQUIRE(par.cells.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(seq.cells[i].val == par.cells[i].val);
  REQUIRE(seq.best == par.best);
  REQUIRE(seq.mean == par.mean);
}

TEST_CASE("evaluate is pure: repeated calls agree and leave parameters alone") {
  const std::string dir = scratch_dir() + "/pure";
  write_overfit_fixture(dir, 8);
  RunConfig cfg = overfit_config(CellVariant::invariant_cp, dir, 2);
  cfg.epochs = 3;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  train_run(m, data);
  std::vector<Tensor> before;
  for (std::size_t i = 0; i < m.store.size(); ++i) before.push_back(m.store[i].value);
  const EvalResult a = evaluate(m, data.test);
  const EvalResult b = evaluate(m, data.test);
  REQUIRE(a.value == b.value);
  for (std::size_t i = 0; i < m.store.size(); ++i)
    REQUIRE(linf_distance(before[i], m.store[i].value) == 0.0);
}

TEST_CASE("length buckets partition the evaluation set") {
  const std::string dir = scratch_dir() + "/sick";
  write_sick_fixture(dir, 31, 60);
  RunConfig cfg;
  cfg.data.task = Task::sick_e;
  cfg.data.tsv = dir + "/SICK.txt";
  cfg.data.trees_a = dir + "/SICK_A.ptb";
  cfg.data.trees_b = dir + "/SICK_B.ptb";
  cfg.variant = CellVariant::invariant_cp;
  cfg.d = 8;
  cfg.n = 8;
  cfg.r = 4;
  cfg.s = 4;
  cfg.epochs = 2;
  cfg.seed = 2;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  train_run(m, data);

  const auto buckets = length_bucket_report(m, data.test, 2);
  std::size_t covered = 0, correct = 0;
  for (const auto& b : buckets) {
    covered += b.count;
    correct += b.correct;
  }
  REQUIRE(covered == data.test.size());
  const EvalResult overall = evaluate(m, data.test);
  REQUIRE(static_cast<double>(correct) / static_cast<double>(covered) ==
          Catch::Approx(overall.value).margin(1e-12));

  // fixture sentences all have 6 words: a single bucket equals overall accuracy
  const auto single = length_bucket_report(m, data.test, 50);
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].accuracy() == Catch::Approx(overall.value));

  // hand-built assignment oracle with bucket width 2
  std::map<std::size_t, std::size_t> manual;
  for (const Example& e : data.test) {
    std::size_t wa = 0, wb = 0;
    for (const Node& n : e.tree_a.nodes)
      if (n.word) ++wa;
    for (const Node& n : e.tree_b->nodes)
      if (n.word) ++wb;
    ++manual[(std::max(wa, wb) / 2) * 2];
  }
  REQUIRE(manual.size() == buckets.size());
  for (const auto& b : buckets) REQUIRE(manual.at(b.lo) == b.count);
}

TEST_CASE("length buckets require an entailment checkpoint") {
  const std::string dir = scratch_dir() + "/sick_r";
  write_sick_fixture(dir, 33, 20);
  RunConfig cfg;
  cfg.data.task = Task::sick_r;
  cfg.data.tsv = dir + "/SICK.txt";
  cfg.data.trees_a = dir + "/SICK_A.ptb";
  cfg.data.trees_b = dir + "/SICK_B.ptb";
  cfg.variant = CellVariant::child_sum;
  cfg.d = 6;
  cfg.n = 6;
  cfg.s = 4;
  cfg.epochs = 1;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  REQUIRE_THROWS_AS(length_bucket_report(m, data.test, 5), usage_error);
}

TEST_CASE("node_probe traces per-node predictions") {
  const std::string dir = scratch_dir() + "/probe";
  write_sick_fixture(dir, 35, 40);
  RunConfig cfg;
  cfg.data.task = Task::sick_e;
  cfg.data.tsv = dir + "/SICK.txt";
  cfg.data.trees_a = dir + "/SICK_A.ptb";
  cfg.data.trees_b = dir + "/SICK_B.ptb";
  cfg.variant = CellVariant::invariant_cp;
  cfg.d = 8;
  cfg.n = 8;
  cfg.r = 4;
  cfg.s = 4;
  cfg.epochs = 2;
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model m = Model::create(cfg, vocab);
  train_run(m, data);

  const Tree raw_a = parse_ptb(
      "(ROOT (S (NP (DT the) (JJ happy) (NN dog)) (VP (VBZ chases) (NP (DT the) (NN cat)))))");
  const Tree raw_b = parse_ptb(
      "(ROOT (S (NP (DT the) (JJ happy) (NN dog)) (VP (VBZ greets) (NP (DT the) (NN cat)))))");

  const auto rows = node_probe(m, raw_a, raw_b, {0, 1, 4});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    double sum = 0.0;
    for (double v : r.dist.data) sum += v;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
  }

  // the root trace equals the evaluation-time prediction on the same pair
  Example pair;
  pair.tree_a = prepare_tree(raw_a, TreeForm::nonbinary);
  pair.tree_b = prepare_tree(raw_b, TreeForm::nonbinary);
  pair.class_target = 0;
  const Tensor eval_dist = m.predict_distribution(pair);
  REQUIRE(linf_distance(rows[0].dist, eval_dist) < 1e-14);

  // identical trees: safe to probe any node, distributions well-formed
  const auto same = node_probe(m, raw_a, raw_a, {2});
  REQUIRE(same.size() == 1);

  REQUIRE_THROWS_AS(node_probe(m, raw_a, raw_b, {999}), usage_error);
  const Tree tiny = parse_ptb("(A x)");
  REQUIRE_THROWS_AS(node_probe(m, raw_a, tiny, {0}), usage_error);
}
