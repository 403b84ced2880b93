#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "treecp/data.hpp"
#include "treecp/optim.hpp"
#include "treecp/runio.hpp"

namespace treecp {

// ---------------------------------------------------------------------------
// enum <-> string

inline std::string to_string(CellVariant v) {
  switch (v) {
    case CellVariant::binary_sum: return "binary_sum";
    case CellVariant::child_sum: return "child_sum";
    case CellVariant::treenet: return "treenet";
    case CellVariant::binary_cp: return "binary_cp";
    case CellVariant::invariant_cp: return "invariant_cp";
  }
  return "?";
}

inline CellVariant variant_from_string(const std::string& s) {
  if (s == "binary_sum") return CellVariant::binary_sum;
  if (s == "child_sum") return CellVariant::child_sum;
  if (s == "treenet") return CellVariant::treenet;
  if (s == "binary_cp") return CellVariant::binary_cp;
  if (s == "invariant_cp") return CellVariant::invariant_cp;
  throw usage_error("unknown variant '" + s + "'");
}

inline std::string to_string(Task t) {
  switch (t) {
    case Task::sst5: return "sst5";
    case Task::sst2: return "sst2";
    case Task::trec: return "trec";
    case Task::sick_r: return "sick_r";
    case Task::sick_e: return "sick_e";
  }
  return "?";
}

inline Task task_from_string(const std::string& s) {
  if (s == "sst5") return Task::sst5;
  if (s == "sst2") return Task::sst2;
  if (s == "trec") return Task::trec;
  if (s == "sick_r") return Task::sick_r;
  if (s == "sick_e") return Task::sick_e;
  throw usage_error("unknown task '" + s + "'");
}

inline std::string to_string(OptimizerKind o) {
  return o == OptimizerKind::adadelta ? "adadelta" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adadelta") return OptimizerKind::adadelta;
  if (s == "adam") return OptimizerKind::adam;
  throw usage_error("unknown optimizer '" + s + "'");
}

inline std::string to_string(UpdateActivation a) {
  return a == UpdateActivation::sigmoid ? "sigmoid" : "tanh";
}

inline UpdateActivation update_activation_from_string(const std::string& s) {
  if (s == "sigmoid") return UpdateActivation::sigmoid;
  if (s == "tanh") return UpdateActivation::tanh;
  throw usage_error("unknown update_activation '" + s + "'");
}

inline std::string to_string(CnfDirection d) {
  return d == CnfDirection::right_branching ? "right_branching" : "left_branching";
}

inline CnfDirection cnf_direction_from_string(const std::string& s) {
  if (s == "right_branching") return CnfDirection::right_branching;
  if (s == "left_branching") return CnfDirection::left_branching;
  throw usage_error("unknown cnf_direction '" + s + "'");
}

// ---------------------------------------------------------------------------
// dataset reference

// Relative dataset paths resolve against $TREECP_DATA_ROOT when set.
inline std::string resolve_data_path(const std::string& p) {
  if (p.empty() || p.front() == '/') return p;
  const char* root = std::getenv("TREECP_DATA_ROOT");
  if (!root || !*root) return p;
  return std::string(root) + "/" + p;
}

struct DataSpec {
  Task task = Task::sst5;
  // sst5/sst2: tree files per split
  std::string train, dev, test;
  // trec: label files per split (train/dev/test above) + aligned tree files
  std::string train_trees, dev_trees, test_trees;
  // sick: one tsv covering all splits + two aligned tree files
  std::string tsv, trees_a, trees_b;
  // optional pretrained embedding file
  std::string glove;

  DataSpec resolved() const {
    DataSpec d = *this;
    for (std::string* p : {&d.train, &d.dev, &d.test, &d.train_trees, &d.dev_trees,
                           &d.test_trees, &d.tsv, &d.trees_a, &d.trees_b, &d.glove})
      *p = resolve_data_path(*p);
    return d;
  }

  std::vector<std::string> input_files() const {
    const DataSpec d = resolved();
    std::vector<std::string> out;
    for (const std::string* p :
         {&d.train, &d.dev, &d.test, &d.train_trees, &d.dev_trees, &d.test_trees, &d.tsv,
          &d.trees_a, &d.trees_b, &d.glove})
      if (!p->empty()) out.push_back(*p);
    return out;
  }

  json to_json() const {
    json j;
    j["task"] = treecp::to_string(task);
    auto put = [&j](const char* k, const std::string& v) {
      if (!v.empty()) j[k] = v;
    };
    put("train", train);
    put("dev", dev);
    put("test", test);
    put("train_trees", train_trees);
    put("dev_trees", dev_trees);
    put("test_trees", test_trees);
    put("tsv", tsv);
    put("trees_a", trees_a);
    put("trees_b", trees_b);
    put("glove", glove);
    return j;
  }

  static DataSpec from_json(const json& j) {
    DataSpec d;
    d.task = task_from_string(j.at("task").get<std::string>());
    auto get = [&j](const char* k) {
      return j.contains(k) ? j.at(k).get<std::string>() : std::string();
    };
    d.train = get("train");
    d.dev = get("dev");
    d.test = get("test");
    d.train_trees = get("train_trees");
    d.dev_trees = get("dev_trees");
    d.test_trees = get("test_trees");
    d.tsv = get("tsv");
    d.trees_a = get("trees_a");
    d.trees_b = get("trees_b");
    d.glove = get("glove");
    return d;
  }
};

// ---------------------------------------------------------------------------
// run configuration

struct RunConfig {
  DataSpec data;
  CellVariant variant = CellVariant::invariant_cp;
  int d = 150;
  int n = 300;
  int r = 50;
  int s = 100;
  int bs = 25;
  double lr = 0.001;
  OptimizerKind optimizer = OptimizerKind::adadelta;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 50;
  int patience = 10;
  std::uint64_t seed = 1;
  UpdateActivation update_activation = UpdateActivation::sigmoid;
  std::optional<bool> fine_tune_embeddings;  // default: true only on SST
  std::optional<bool> per_node_supervision;  // default: true only on SST
  bool similarity_dropout = false;
  double dropout = 0.5;
  double clip_norm = 5.0;
  int max_arity = 0;
  CnfDirection cnf_direction = CnfDirection::right_branching;

  bool is_sst() const { return data.task == Task::sst5 || data.task == Task::sst2; }
  bool fine_tune() const { return fine_tune_embeddings.value_or(is_sst()); }
  bool per_node() const { return per_node_supervision.value_or(is_sst()); }

  CellConfig cell_config() const {
    CellConfig c;
    c.variant = variant;
    c.d = d;
    c.n = n;
    c.r = r;
    c.update_activation = update_activation;
    c.max_arity = max_arity;
    return c;
  }

  json to_json() const {
    json j;
    j["data"] = data.to_json();
    j["variant"] = treecp::to_string(variant);
    j["d"] = d;
    j["n"] = n;
    j["r"] = r;
    j["s"] = s;
    j["bs"] = bs;
    j["lr"] = lr;
    j["optimizer"] = treecp::to_string(optimizer);
    j["adadelta_rho"] = adadelta_rho;
    j["adadelta_eps"] = adadelta_eps;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["epochs"] = epochs;
    j["patience"] = patience;
    j["seed"] = seed;
    j["update_activation"] = treecp::to_string(update_activation);
    if (fine_tune_embeddings) j["fine_tune_embeddings"] = *fine_tune_embeddings;
    if (per_node_supervision) j["per_node_supervision"] = *per_node_supervision;
    j["similarity_dropout"] = similarity_dropout;
    j["dropout"] = dropout;
    j["clip_norm"] = clip_norm;
    j["max_arity"] = max_arity;
    j["cnf_direction"] = treecp::to_string(cnf_direction);
    return j;
  }

  static RunConfig from_json(const json& j) {
    static const char* known[] = {
        "data",       "variant",       "d",          "n",
        "r",          "s",             "bs",         "lr",
        "optimizer",  "adadelta_rho",  "adadelta_eps", "adam_beta1",
        "adam_beta2", "adam_eps",      "epochs",     "patience",
        "seed",       "update_activation", "fine_tune_embeddings",
        "per_node_supervision", "similarity_dropout", "dropout",
        "clip_norm",  "max_arity",     "cnf_direction"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw usage_error("unknown config key '" + it.key() + "'");
    }
    RunConfig c;
    c.data = DataSpec::from_json(j.at("data"));
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant"));
    auto geti = [&j](const char* k, int dflt) { return j.contains(k) ? j.at(k).get<int>() : dflt; };
    auto getd = [&j](const char* k, double dflt) {
      return j.contains(k) ? j.at(k).get<double>() : dflt;
    };
    c.d = geti("d", c.d);
    c.n = geti("n", c.n);
    c.r = geti("r", c.r);
    c.s = geti("s", c.s);
    c.bs = geti("bs", c.bs);
    c.lr = getd("lr", c.lr);
    if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer"));
    c.adadelta_rho = getd("adadelta_rho", c.adadelta_rho);
    c.adadelta_eps = getd("adadelta_eps", c.adadelta_eps);
    c.adam_beta1 = getd("adam_beta1", c.adam_beta1);
    c.adam_beta2 = getd("adam_beta2", c.adam_beta2);
    c.adam_eps = getd("adam_eps", c.adam_eps);
    c.epochs = geti("epochs", c.epochs);
    c.patience = geti("patience", c.patience);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("update_activation"))
      c.update_activation = update_activation_from_string(j.at("update_activation"));
    if (j.contains("fine_tune_embeddings"))
      c.fine_tune_embeddings = j.at("fine_tune_embeddings").get<bool>();
    if (j.contains("per_node_supervision"))
      c.per_node_supervision = j.at("per_node_supervision").get<bool>();
    if (j.contains("similarity_dropout"))
      c.similarity_dropout = j.at("similarity_dropout").get<bool>();
    c.dropout = getd("dropout", c.dropout);
    c.clip_norm = getd("clip_norm", c.clip_norm);
    c.max_arity = geti("max_arity", c.max_arity);
    if (j.contains("cnf_direction"))
      c.cnf_direction = cnf_direction_from_string(j.at("cnf_direction"));
    return c;
  }
};

// ---------------------------------------------------------------------------
// dataset assembly

struct DatasetBundle {
  std::vector<Example> train, dev, test;

  const std::vector<Example>& split(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::dev: return dev;
      case Split::test: return test;
    }
    return train;
  }
};

inline DatasetBundle split_examples(std::vector<Example> all) {
  DatasetBundle b;
  for (Example& e : all) {
    switch (e.split) {
      case Split::train: b.train.push_back(std::move(e)); break;
      case Split::dev: b.dev.push_back(std::move(e)); break;
      case Split::test: b.test.push_back(std::move(e)); break;
    }
  }
  return b;
}

// Loads raw examples and applies the variant's tree form.
inline DatasetBundle load_dataset(const RunConfig& cfg) {
  const DataSpec ds = cfg.data.resolved();
  DatasetBundle b;
  switch (ds.task) {
    case Task::sst5:
    case Task::sst2: {
      const SstGranularity g =
          ds.task == Task::sst5 ? SstGranularity::five : SstGranularity::two;
      b.train = load_sst(ds.train, g, Split::train);
      if (!ds.dev.empty()) b.dev = load_sst(ds.dev, g, Split::dev);
      if (!ds.test.empty()) b.test = load_sst(ds.test, g, Split::test);
      break;
    }
    case Task::trec: {
      b.train = load_trec(ds.train, ds.train_trees, Split::train);
      if (!ds.dev.empty()) b.dev = load_trec(ds.dev, ds.dev_trees, Split::dev);
      if (!ds.test.empty()) b.test = load_trec(ds.test, ds.test_trees, Split::test);
      break;
    }
    case Task::sick_r:
    case Task::sick_e: {
      b = split_examples(load_sick(ds.tsv, ds.trees_a, ds.trees_b, ds.task));
      break;
    }
  }
  const TreeForm form = form_for_variant(cfg.variant);
  prepare_examples(b.train, form, cfg.cnf_direction);
  prepare_examples(b.dev, form, cfg.cnf_direction);
  prepare_examples(b.test, form, cfg.cnf_direction);
  return b;
}

inline Vocabulary build_vocabulary(const RunConfig& cfg, const DatasetBundle& b) {
  std::vector<Example> all;
  all.insert(all.end(), b.train.begin(), b.train.end());
  all.insert(all.end(), b.dev.begin(), b.dev.end());
  all.insert(all.end(), b.test.begin(), b.test.end());
  const auto tokens = collect_tokens(all);
  if (cfg.data.glove.empty()) return random_vocab(tokens, cfg.n, cfg.seed);
  return load_glove(resolve_data_path(cfg.data.glove), tokens, cfg.n, cfg.seed);
}

}  // namespace treecp
