#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecp/checkpoint.hpp"
#include "treecp/config.hpp"
#include "treecp/heads.hpp"

namespace treecp {

// A task model: embedding table + composition cell + task head, all backed by
// one ParamStore. Checkpoints carry every tensor plus config and vocabulary.
class Model {
 public:
  RunConfig cfg;
  ParamStore store;
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> token_index;
  Param* embedding = nullptr;
  CellParams cell;
  ClassifierHead cls;  // classification tasks
  PairHead pair;       // pair tasks

  static Model create(const RunConfig& cfg, const Vocabulary& vocab) {
    Model m;
    m.cfg = cfg;
    m.tokens = vocab.tokens;
    m.token_index = vocab.index;
    std::mt19937_64 rng(cfg.seed);
    m.embedding = &m.store.add("embedding.table", vocab.vectors);
    m.embedding->trainable = cfg.fine_tune();
    m.cell = CellParams::create(m.store, cfg.cell_config(), rng);
    m.wire_head(&rng);
    return m;
  }

  static Model load(const std::string& path) {
    Model m;
    const json manifest = load_checkpoint_manifest(path);
    m.cfg = RunConfig::from_json(manifest.at("model"));
    m.tokens = manifest.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < m.tokens.size(); ++i)
      m.token_index[m.tokens[i]] = static_cast<int>(i);
    load_tensors(path, m.store);
    m.embedding = &m.store.at("embedding.table");
    m.embedding->trainable = m.cfg.fine_tune();
    m.cell = CellParams::bind(m.store, m.cfg.cell_config());
    m.wire_head(nullptr);
    return m;
  }

  void save(const std::string& path) const {
    json manifest;
    manifest["format"] = 1;
    manifest["precision"] = "float64";
    manifest["seed"] = cfg.seed;
    manifest["model"] = cfg.to_json();
    manifest["vocab"] = tokens;
    save_checkpoint(path, store, manifest);
  }

  bool is_pair() const { return is_pair_task(cfg.data.task); }
  int class_count() const { return task_class_count(cfg.data.task); }

  int word_index(const std::string& w) const {
    auto it = token_index.find(w);
    return it == token_index.end() ? 0 : it->second;
  }

  // Out-of-vocabulary words resolve to the <unk> row; when fine-tuning is off
  // rows enter the tape as constants so no table gradient is tracked.
  EmbeddingFn embedder() {
    return [this](Tape& t, const std::string& w) -> Var {
      const auto idx = static_cast<std::size_t>(word_index(w));
      if (embedding->trainable) return t.row(t.param(*embedding), idx);
      Tensor row({embedding->value.cols()});
      for (std::size_t c = 0; c < row.numel(); ++c) row[c] = embedding->value(idx, c);
      return t.constant(std::move(row));
    };
  }

  EncodedTree encode(Tape& t, const Tree& tree) { return encode_tree(t, tree, cell, embedder()); }

  // Training loss for one example. Classification sums cross entropy over all
  // class-labeled nodes when per-node supervision is on, root-only otherwise;
  // pair tasks use KL against the sparse score target or cross entropy on the
  // entailment class.
  Var example_loss(Tape& t, const Example& e, std::mt19937_64& rng) {
    if (!is_pair()) {
      EncodedTree enc = encode(t, e.tree_a);
      if (cfg.per_node()) {
        Var total = t.constant(Tensor::scalar(0.0));
        bool any = false;
        for (std::size_t id = 0; id < e.tree_a.size(); ++id) {
          const auto& node = e.tree_a.at(static_cast<NodeId>(id));
          if (!node.node_class) continue;
          Var p = cls.probs(t, enc.states[id].h, true, &rng);
          total = t.add(total, t.ce_loss(p, static_cast<std::size_t>(*node.node_class)));
          any = true;
        }
        if (any) return total;
      }
      Var p = cls.probs(t, enc.root_state().h, true, &rng);
      return t.ce_loss(p, static_cast<std::size_t>(e.class_target));
    }
    EncodedTree a = encode(t, e.tree_a);
    EncodedTree b = encode(t, *e.tree_b);
    Var p = pair.probs(t, a.root_state().h, b.root_state().h, true, &rng);
    if (cfg.data.task == Task::sick_r)
      return t.kl_loss(p, sparse_target(e.score_target, pair.m));
    return t.ce_loss(p, static_cast<std::size_t>(e.class_target));
  }

  // Deterministic evaluation-mode distribution (dropout is an identity).
  Tensor predict_distribution(const Example& e) {
    Tape t;
    if (!is_pair()) {
      EncodedTree enc = encode(t, e.tree_a);
      return t.val(cls.probs(t, enc.root_state().h, false, nullptr));
    }
    EncodedTree a = encode(t, e.tree_a);
    EncodedTree b = encode(t, *e.tree_b);
    return t.val(pair.probs(t, a.root_state().h, b.root_state().h, false, nullptr));
  }

  int predict_class(const Example& e) {
    return static_cast<int>(argmax_lowest(predict_distribution(e)));
  }

  double predict_score(const Example& e) { return pair.expected_score(predict_distribution(e)); }

 private:
  void wire_head(std::mt19937_64* rng) {
    const Task task = cfg.data.task;
    if (!is_pair_task(task)) {
      cls = ClassifierHead::wire(store, cfg.d, cfg.s, task_class_count(task), rng);
      cls.dropout_rate = cfg.dropout;
      return;
    }
    const PairTask pt = task == Task::sick_r ? PairTask::relatedness : PairTask::entailment;
    pair = PairHead::wire(store, pt, cfg.d, cfg.s, task_class_count(task), rng);
    pair.use_dropout = cfg.similarity_dropout;
    pair.dropout_rate = cfg.dropout;
  }
};

}  // namespace treecp
