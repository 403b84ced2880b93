// Command-line surface for the tree-LSTM pipeline: preprocessing, gradient
// checking, training, evaluation, grid search, analysis reports, and fixture
// generation. Exit codes: 0 success, 1 failed check, 2 input error.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treecp/treecp.hpp"

namespace {

using namespace treecp;

std::string stats_csv(const CorpusStats& s) {
  std::string header = "trees,nodes,internal,leaves,labeled";
  std::string row = std::to_string(s.tree_count) + "," + std::to_string(s.node_count) + "," +
                    std::to_string(s.node_count - s.leaf_count) + "," +
                    std::to_string(s.leaf_count) + "," + std::to_string(s.labeled_node_count);
  for (const auto& [deg, count] : s.out_degree_histogram) {
    header += ",deg_" + std::to_string(deg);
    row += "," + std::to_string(count);
  }
  for (const auto& [depth, count] : s.depth_histogram) {
    header += ",depth_" + std::to_string(depth);
    row += "," + std::to_string(count);
  }
  return header + "\n" + row + "\n";
}

int cmd_preprocess(const std::string& input, const std::string& mode, const std::string& out,
                   const std::string& direction) {
  const CnfDirection dir = cnf_direction_from_string(direction);
  TreeForm form;
  if (mode == "nonbinary")
    form = TreeForm::nonbinary;
  else if (mode == "binary")
    form = TreeForm::binary;
  else if (mode == "treenet")
    form = TreeForm::treenet;
  else
    throw usage_error("unknown mode '" + mode + "'");

  std::ifstream in(input);
  if (!in) throw format_error("cannot open " + input);
  std::filesystem::create_directories(out);

  std::vector<Tree> trees;
  std::string line, body, errors;
  std::size_t lineno = 0, failures = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
    if (blank) continue;
    try {
      Tree t = prepare_tree(parse_ptb(line), form, dir);
      trees.push_back(t);
      body += serialize(t) + "\n";
    } catch (const parse_error& e) {
      const std::string msg = "line " + std::to_string(lineno) + ": " + e.what();
      std::cerr << input << ": " << msg << "\n";
      errors += msg + "\n";
      ++failures;
    }
  }
  write_file(out + "/trees.txt", body);
  write_file(out + "/stats.csv", stats_csv(corpus_stats(trees)));
  if (failures) write_file(out + "/errors.log", errors);
  json cfg{{"input", input}, {"mode", mode}, {"cnf_direction", direction}};
  write_run_manifest(out, "preprocess", cfg, 0, {input});
  std::cout << trees.size() << " trees -> " << out << "/trees.txt";
  if (failures) std::cout << " (" << failures << " parse failures)";
  std::cout << "\n";
  return failures ? 2 : 0;
}

// Gradient check over a full encode pass of a small fixed tree: all leaf and
// composition parameters plus the embedding rows participate.
int cmd_gradcheck(const std::string& variant_name, int d, int r, int n, std::uint64_t seed,
                  double tolerance, bool corrupt, const std::string& out) {
  const CellVariant variant = variant_from_string(variant_name);

  Tree raw = parse_ptb("(0 (0 (0 apple) (0 berry)) (0 cedar))");
  if (!is_binary_variant(variant) || variant == CellVariant::treenet)
    raw = parse_ptb("(0 (0 apple) (0 berry) (0 cedar))");
  const Tree tree = prepare_tree(raw, form_for_variant(variant));

  ParamStore st;
  std::mt19937_64 rng(seed);
  Param& table = st.add("embedding.table", Tensor({3, static_cast<std::size_t>(n)}));
  init_uniform_range(table.value, -0.5, 0.5, rng);
  CellConfig cc;
  cc.variant = variant;
  cc.d = d;
  cc.n = n;
  cc.r = r;
  CellParams params = CellParams::create(st, cc, rng);

  Tensor w({static_cast<std::size_t>(d)});
  init_uniform(w, 1, rng);
  const EmbeddingFn emb = [&table](Tape& t, const std::string& word) {
    const std::size_t idx = word == "apple" ? 0 : (word == "berry" ? 1 : 2);
    return t.row(t.param(table), idx);
  };
  auto build = [&](Tape& t) {
    EncodedTree enc = encode_tree(t, tree, params, emb);
    return t.dot_const(enc.root_state().h, w);
  };

  std::vector<Param*> ps;
  for (std::size_t i = 0; i < st.size(); ++i) ps.push_back(&st[i]);
  const GradCheckReport rep = grad_check(std::span<Param* const>(ps.data(), ps.size()), build,
                                         1e-5, corrupt ? 0.5 : 0.0);

  std::string csv = "param,coords,exact,max_rel_err\n";
  for (const auto& e : rep.entries) {
    csv += e.name + "," + std::to_string(e.coords) + "," + std::to_string(e.exact_coords) +
           "," + fmt_double(e.max_rel_err) + "\n";
    std::cout << e.name << "  max_rel_err=" << fmt_double(e.max_rel_err) << "\n";
  }
  const bool ok = rep.pass(tolerance);
  std::cout << "max relative error " << fmt_double(rep.max_rel_err) << " ("
            << (ok ? "PASS" : "FAIL") << " at " << tolerance << ")\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(out + "/gradcheck.csv", csv);
    json cfg{{"variant", variant_name}, {"d", d}, {"r", r}, {"n", n}, {"tolerance", tolerance}};
    write_run_manifest(out, "gradcheck", cfg, seed, {});
  }
  return ok ? 0 : 1;
}

int cmd_train(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = RunConfig::from_json(json::parse(read_file(config_path)));
  DatasetBundle data = load_dataset(cfg);
  Vocabulary vocab = build_vocabulary(cfg, data);
  Model model = Model::create(cfg, vocab);
  TrainResult res = train_run(model, data);

  std::filesystem::create_directories(out);
  write_file(out + "/metrics.csv", metrics_csv(res.rows));
  model.save(out + "/checkpoint.bin");
  write_run_manifest(out, "train", cfg.to_json(), cfg.seed, cfg.data.input_files());
  std::cout << "best dev " << res.metric << " " << fmt_double(res.best_val) << " at epoch "
            << res.best_epoch << " (" << res.epochs_run << " epochs run)\n";
  if (res.has_test)
    std::cout << "test " << res.metric << " " << fmt_double(res.test_value) << "\n";
  std::cout << "checkpoint: " << out << "/checkpoint.bin\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& split_name,
             const std::string& out) {
  Split split;
  if (split_name == "train")
    split = Split::train;
  else if (split_name == "dev")
    split = Split::dev;
  else if (split_name == "test")
    split = Split::test;
  else
    throw usage_error("unknown split '" + split_name + "'");

  Model model = Model::load(checkpoint);
  DatasetBundle data = load_dataset(model.cfg);
  const EvalResult r = evaluate(model, data.split(split));
  std::string row = split_name + "," + r.metric + "," + fmt_double(r.value);
  if (r.degenerate) row += ",degenerate";
  std::cout << row << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(out + "/eval.csv", "split,metric,value\n" + row + "\n");
    json cfg{{"checkpoint", checkpoint}, {"split", split_name}};
    write_run_manifest(out, "eval", cfg, model.cfg.seed, {checkpoint});
  }
  return 0;
}

GridAxes parse_axes(const json& g) {
  GridAxes axes;
  static const char* known[] = {"bs", "lr", "d", "r", "s"};
  for (auto it = g.begin(); it != g.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw usage_error("unknown grid axis '" + it.key() + "'");
  }
  if (g.contains("bs")) axes.bs = g.at("bs").get<std::vector<int>>();
  if (g.contains("lr")) axes.lr = g.at("lr").get<std::vector<double>>();
  if (g.contains("d")) axes.d = g.at("d").get<std::vector<int>>();
  if (g.contains("r")) axes.r = g.at("r").get<std::vector<int>>();
  if (g.contains("s")) axes.s = g.at("s").get<std::vector<int>>();
  return axes;
}

int cmd_grid(const std::string& grids_path, const std::string& out, int jobs) {
  const json spec = json::parse(read_file(grids_path));
  const RunConfig base = RunConfig::from_json(spec.at("config"));
  const GridAxes axes = spec.contains("grid") ? parse_axes(spec.at("grid")) : GridAxes{};
  const int repeats = spec.contains("repeats") ? spec.at("repeats").get<int>() : 5;

  DatasetBundle data = load_dataset(base);
  Vocabulary vocab = build_vocabulary(base, data);
  const GridOutcome g = grid_search(base, axes, data, vocab, repeats, jobs);

  std::string results = "index,bs,lr,d,r,s,val\n";
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const RunConfig& c = g.cells[i].cfg;
    results += std::to_string(i) + "," + std::to_string(c.bs) + "," + fmt_double(c.lr) + "," +
               std::to_string(c.d) + "," + std::to_string(c.r) + "," + std::to_string(c.s) +
               "," + fmt_double(g.cells[i].val) + "\n";
  }
  std::string repeats_csv = "repeat,seed,test\n";
  for (std::size_t i = 0; i < g.repeat_test.size(); ++i)
    repeats_csv += std::to_string(i) + "," + std::to_string(base.seed + i) + "," +
                   fmt_double(g.repeat_test[i]) + "\n";
  const std::string formatted = table_row(g);
  std::string table = "dataset,variant,metric,mean,std,score\n";
  table += to_string(base.data.task) + "," + to_string(base.variant) + "," + g.metric + "," +
           fmt_double(g.mean) + "," + fmt_double(g.stddev) + ",\"" + formatted + "\"\n";

  std::filesystem::create_directories(out);
  write_file(out + "/results.csv", results);
  write_file(out + "/repeats.csv", repeats_csv);
  write_file(out + "/table.csv", table);
  write_run_manifest(out, "grid", spec, base.seed, base.data.input_files());

  const RunConfig& bc = g.cells[g.best].cfg;
  std::cout << g.cells.size() << " grid cells; best: bs=" << bc.bs << " lr=" << fmt_double(bc.lr)
            << " d=" << bc.d << " r=" << bc.r << " s=" << bc.s
            << " (val " << fmt_double(g.cells[g.best].val) << ")\n";
  std::cout << to_string(base.data.task) << " " << to_string(base.variant) << ": " << formatted
            << "\n";
  return 0;
}

int cmd_analyze_param_count(const std::string& variant_name, int d, int r, int n, int s, int m,
                            int arity, const std::string& out) {
  CellConfig cc;
  cc.variant = variant_from_string(variant_name);
  cc.d = d;
  cc.n = n;
  cc.r = r;
  cc.sum_arity = arity;
  ParamStore st;
  std::mt19937_64 rng(0);
  CellParams::create(st, cc, rng);
  if (m > 0) ClassifierHead::wire(st, d, s, m, &rng);
  const ParamCount pc = param_count(st);
  std::string csv = "group,count\n";
  csv += "leaf," + std::to_string(pc.leaf) + "\n";
  csv += "composition," + std::to_string(pc.composition) + "\n";
  csv += "head," + std::to_string(pc.head) + "\n";
  csv += "total," + std::to_string(pc.total()) + "\n";
  std::cout << csv;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(out + "/param_count.csv", csv);
    json cfg{{"variant", variant_name}, {"d", d}, {"r", r}, {"n", n}, {"s", s}, {"m", m}};
    write_run_manifest(out, "analyze", cfg, 0, {});
  }
  return 0;
}

int cmd_analyze_length_buckets(const std::string& checkpoint, const std::string& split_name,
                               std::size_t width, const std::string& out) {
  Model model = Model::load(checkpoint);
  DatasetBundle data = load_dataset(model.cfg);
  const auto& split = split_name == "train" ? data.train
                      : split_name == "dev" ? data.dev
                                            : data.test;
  const auto buckets = length_bucket_report(model, split, width);
  std::string csv = "bucket_lo,bucket_hi,count,accuracy\n";
  for (const auto& b : buckets)
    csv += std::to_string(b.lo) + "," + std::to_string(b.hi) + "," + std::to_string(b.count) +
           "," + fmt_double(b.accuracy()) + "\n";
  std::cout << csv;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(out + "/length_buckets.csv", csv);
    json cfg{{"checkpoint", checkpoint}, {"split", split_name}, {"width", width}};
    write_run_manifest(out, "analyze", cfg, model.cfg.seed, {checkpoint});
  }
  return 0;
}

int cmd_analyze_node_probe(const std::string& checkpoint, const std::string& tree_a_path,
                           const std::string& tree_b_path, const std::string& path_arg,
                           const std::string& out) {
  Model model = Model::load(checkpoint);
  const auto lines_a = treecp::detail::read_lines(tree_a_path);
  const auto lines_b = treecp::detail::read_lines(tree_b_path);
  if (lines_a.empty() || lines_b.empty()) throw format_error("empty tree file");
  const Tree a = parse_ptb(lines_a[0]);
  const Tree b = parse_ptb(lines_b[0]);

  std::vector<NodeId> path;
  std::stringstream ss(path_arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      path.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw usage_error("bad node id '" + tok + "' in --path");
    }
  }
  if (path.empty()) throw usage_error("--path lists no node ids");

  const auto rows = node_probe(model, a, b, path);
  std::string csv = "node";
  for (int k = 0; k < model.pair.m; ++k) csv += ",p" + std::to_string(k);
  csv += ",argmax\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.node);
    for (std::size_t k = 0; k < r.dist.numel(); ++k) csv += "," + fmt_double(r.dist[k]);
    csv += "," + std::to_string(argmax_lowest(r.dist)) + "\n";
  }
  std::cout << csv;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(out + "/node_probe.csv", csv);
    json cfg{{"checkpoint", checkpoint}, {"tree_a", tree_a_path}, {"tree_b", tree_b_path},
             {"path", path_arg}};
    write_run_manifest(out, "analyze", cfg, model.cfg.seed,
                       {checkpoint, tree_a_path, tree_b_path});
  }
  return 0;
}

int cmd_synth(const std::string& task, const std::string& out, std::uint64_t seed, int count) {
  if (task == "overfit") {
    write_overfit_fixture(out, seed, count > 0 ? count : 20);
  } else if (task == "bool") {
    write_bool_task(out, seed);
  } else if (task == "sick") {
    write_sick_fixture(out, seed, count > 0 ? count : 200);
  } else {
    throw usage_error("unknown synth task '" + task + "'");
  }
  json cfg{{"task", task}, {"count", count}};
  write_run_manifest(out, "synth", cfg, seed, {});
  std::cout << "wrote " << task << " fixtures to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tree-structured LSTM composition functions over constituency trees"};
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("preprocess", "collapse and transform PTB trees");
  std::string pre_input, pre_mode, pre_out, pre_dir = "right_branching";
  pre->add_option("--input", pre_input, "PTB file, one tree per line")->required();
  pre->add_option("--mode", pre_mode, "nonbinary | binary | treenet")->required();
  pre->add_option("--out", pre_out, "output directory")->required();
  pre->add_option("--direction", pre_dir, "CNF factoring: right_branching | left_branching");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of a cell variant");
  std::string gc_variant, gc_out;
  int gc_d = 4, gc_r = 3, gc_n = 4;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  bool gc_corrupt = false;
  gc->add_option("--variant", gc_variant, "cell variant")->required();
  gc->add_option("--d", gc_d, "hidden width");
  gc->add_option("--r", gc_r, "decomposition rank");
  gc->add_option("--n", gc_n, "embedding width");
  gc->add_option("--seed", gc_seed, "rng seed");
  gc->add_option("--tolerance", gc_tol, "max relative error");
  gc->add_option("--out", gc_out, "report directory");
  gc->add_flag("--corrupt-gradient", gc_corrupt)->group("");  // fault-injection test hook

  auto* tr = app.add_subcommand("train", "train from a run-config JSON");
  std::string tr_config, tr_out;
  tr->add_option("--config", tr_config, "run config JSON")->required();
  tr->add_option("--out", tr_out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ev_ckpt, ev_split = "test", ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--split", ev_split, "train | dev | test");
  ev->add_option("--out", ev_out, "output directory");

  auto* gr = app.add_subcommand("grid", "grid search from a grid-spec JSON");
  std::string gr_spec, gr_out;
  int gr_jobs = 1;
  gr->add_option("--grids", gr_spec, "grid spec JSON")->required();
  gr->add_option("--out", gr_out, "output directory")->required();
  gr->add_option("--jobs", gr_jobs, "parallel grid cells");

  auto* an = app.add_subcommand("analyze", "reports: param-count, length-buckets, node-probe");
  std::string an_report, an_variant = "invariant_cp", an_ckpt, an_split = "test";
  std::string an_tree_a, an_tree_b, an_path, an_out;
  int an_d = 4, an_r = 3, an_n = 0, an_s = 0, an_m = 0, an_arity = 2;
  std::size_t an_width = 5;
  an->add_option("--report", an_report, "param-count | length-buckets | node-probe")->required();
  an->add_option("--variant", an_variant, "cell variant (param-count)");
  an->add_option("--d", an_d, "hidden width (param-count)");
  an->add_option("--r", an_r, "rank (param-count)");
  an->add_option("--n", an_n, "embedding width (param-count)");
  an->add_option("--s", an_s, "classifier hidden size (param-count)");
  an->add_option("--m", an_m, "class count; adds the head group (param-count)");
  an->add_option("--arity", an_arity, "sum-LSTM arity (param-count)");
  an->add_option("--checkpoint", an_ckpt, "checkpoint path");
  an->add_option("--split", an_split, "split (length-buckets)");
  an->add_option("--bucket-width", an_width, "bucket width (length-buckets)");
  an->add_option("--tree-a", an_tree_a, "PTB file, first line used (node-probe)");
  an->add_option("--tree-b", an_tree_b, "PTB file, first line used (node-probe)");
  an->add_option("--path", an_path, "comma-separated node ids (node-probe)");
  an->add_option("--out", an_out, "output directory");

  auto* sy = app.add_subcommand("synth", "write synthetic fixtures");
  std::string sy_task, sy_out;
  std::uint64_t sy_seed = 1;
  int sy_count = 0;
  sy->add_option("--task", sy_task, "overfit | bool | sick")->required();
  sy->add_option("--out", sy_out, "output directory")->required();
  sy->add_option("--seed", sy_seed, "rng seed");
  sy->add_option("--count", sy_count, "example/pair count (task-dependent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*pre) return cmd_preprocess(pre_input, pre_mode, pre_out, pre_dir);
    if (*gc) return cmd_gradcheck(gc_variant, gc_d, gc_r, gc_n, gc_seed, gc_tol, gc_corrupt, gc_out);
    if (*tr) return cmd_train(tr_config, tr_out);
    if (*ev) return cmd_eval(ev_ckpt, ev_split, ev_out);
    if (*gr) return cmd_grid(gr_spec, gr_out, gr_jobs);
    if (*an) {
      if (an_report == "param-count")
        return cmd_analyze_param_count(an_variant, an_d, an_r, an_n, an_s, an_m, an_arity, an_out);
      if (an_report == "length-buckets")
        return cmd_analyze_length_buckets(an_ckpt, an_split, an_width, an_out);
      if (an_report == "node-probe")
        return cmd_analyze_node_probe(an_ckpt, an_tree_a, an_tree_b, an_path, an_out);
      throw usage_error("unknown report '" + an_report + "'");
    }
    if (*sy) return cmd_synth(sy_task, sy_out, sy_seed, sy_count);
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dim_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
