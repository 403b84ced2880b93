#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "treecp/config.hpp"
#include "treecp/heads.hpp"
#include "treecp/runio.hpp"

namespace treecp {

// ---------------------------------------------------------------------------
// random trees for property checks

// Random labeled tree: internal out-degrees in [2, max_degree], words drawn
// from a small pool, every node class-labeled 0..4 (SST-style).
inline Tree random_tree(std::mt19937_64& rng, int max_depth, int max_degree,
                        int min_degree = 2) {
  static const std::vector<std::string> kWords = {
      "the", "a",    "movie", "film",  "plot", "cast",  "score", "was",
      "is",  "felt", "good",  "bad",   "slow", "sharp", "fun",   "dull"};
  Tree t;
  std::uniform_int_distribution<int> cls(0, 4);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);

  struct Gen {
    Tree& t;
    std::mt19937_64& rng;
    int max_degree, min_degree;
    std::uniform_int_distribution<int>& cls;
    std::uniform_int_distribution<std::size_t>& word;

    NodeId run(int depth) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const bool leaf = depth <= 0 || u(rng) < 0.3;
      if (leaf) {
        Node n;
        n.word = kWords[word(rng)];
        n.label = std::to_string(cls(rng));
        n.node_class = detail::class_of_label(*n.label);
        return t.add(std::move(n));
      }
      Node n;
      n.label = std::to_string(cls(rng));
      n.node_class = detail::class_of_label(*n.label);
      NodeId id = t.add(std::move(n));
      std::uniform_int_distribution<int> deg(min_degree, max_degree);
      const int k = deg(rng);
      std::vector<NodeId> kids;
      for (int i = 0; i < k; ++i) kids.push_back(run(depth - 1));
      t.at(id).children = std::move(kids);
      return id;
    }
  } gen{t, rng, max_degree, min_degree, cls, word};
  t.root = gen.run(max_depth);
  return t;
}

// ---------------------------------------------------------------------------
// overfit fixture: 20 random labeled trees in SST format

// Distinct random sentences with arbitrary class labels; a correct trainer
// must be able to memorize them. Sentences are deduplicated on an
// order-insensitive key (sorted groups of sorted words) so that
// permutation-invariant cells can still tell every pair apart. Internal
// nodes carry the neutral label so the files parse as SST; root labels carry
// the target class.
inline std::vector<std::string> make_overfit_fixture_lines(std::uint64_t seed, int count = 20,
                                                           int classes = 4) {
  static const std::vector<std::string> kWords = {"alpha", "bravo", "delta", "echo",
                                                  "gamma", "kilo",  "lima",  "omega",
                                                  "sigma", "tango", "viper", "zeta"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  std::uniform_int_distribution<int> arity(2, 3);
  std::set<std::string> seen;
  std::vector<std::string> lines;
  int cls = 0;
  while (static_cast<int>(lines.size()) < count) {
    // depth-2 tree: root over 2-3 groups of 2-3 leaves
    std::vector<std::vector<std::string>> groups(static_cast<std::size_t>(arity(rng)));
    for (auto& g : groups) {
      const int leaves = arity(rng);
      for (int l = 0; l < leaves; ++l) g.push_back(kWords[word(rng)]);
    }
    std::vector<std::string> key_parts;
    for (auto g : groups) {
      std::sort(g.begin(), g.end());
      std::string part;
      for (const auto& w : g) part += w + " ";
      key_parts.push_back(part);
    }
    std::sort(key_parts.begin(), key_parts.end());
    std::string key;
    for (const auto& p : key_parts) key += p + "|";
    if (!seen.insert(key).second) continue;

    std::string line = "(" + std::to_string(cls);
    for (const auto& g : groups) {
      line += " (2";
      for (const auto& w : g) line += " (2 " + w + ")";
      line += ")";
    }
    line += ")";
    lines.push_back(line);
    cls = (cls + 1) % classes;
  }
  return lines;
}

inline void write_overfit_fixture(const std::string& dir, std::uint64_t seed, int count = 20,
                                  int classes = 4) {
  std::filesystem::create_directories(dir);
  const auto lines = make_overfit_fixture_lines(seed, count, classes);
  std::string body;
  for (const auto& l : lines) body += l + "\n";
  write_file(dir + "/train.txt", body);
  write_file(dir + "/dev.txt", body);  // overfit protocol: validate on train
  write_file(dir + "/test.txt", body);
}

// ---------------------------------------------------------------------------
// boolean-expression task

// AND/OR expressions over literal leaves. The operator is itself a leaf word
// (words live only on leaves), so a node with k operands has out-degree k+1.
// The root label is the truth value of the expression.
struct BoolExample {
  std::string line;  // SST-style, all-node labels
  bool truth;
};

namespace detail {

struct BoolGen {
  std::mt19937_64& rng;
  int max_operands;

  // Returns {text, value}; text is an S-expression with labels equal to the
  // subexpression truth value.
  std::pair<std::string, bool> gen(int depth) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (depth <= 0 || u(rng) < 0.25) {
      const bool v = u(rng) < 0.5;
      const char* w = v ? "T" : "F";
      return {std::string("(") + (v ? "1" : "0") + " " + w + ")", v};
    }
    const bool is_and = u(rng) < 0.5;
    std::uniform_int_distribution<int> ops(2, max_operands);
    const int k = ops(rng);
    std::vector<std::pair<std::string, bool>> parts;
    parts.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) parts.push_back(gen(depth - 1));
    bool v = is_and;
    for (const auto& pr : parts) v = is_and ? (v && pr.second) : (v || pr.second);
    std::string body = "(2 ";
    body += is_and ? "and" : "or";
    body += ")";
    for (const auto& pr : parts) body += " " + pr.first;
    return {std::string("(") + (v ? "1" : "0") + " " + body + ")", v};
  }
};

}  // namespace detail

// Seeded generator; expressions are unique across the whole set and the
// label distribution is balanced by construction (rejection).
inline std::vector<BoolExample> make_bool_examples(std::uint64_t seed, int count,
                                                   int max_operands = 3, int max_depth = 3) {
  std::mt19937_64 rng(seed);
  detail::BoolGen gen{rng, max_operands};
  std::set<std::string> seen;
  std::vector<BoolExample> out;
  int trues = 0;
  while (static_cast<int>(out.size()) < count) {
    auto [text, v] = gen.gen(max_depth);
    if (text.find(' ') == std::string::npos) continue;  // skip bare literals
    if (!seen.insert(text).second) continue;
    // keep the two labels within one example of each other
    const int falses = static_cast<int>(out.size()) - trues;
    if (v && trues > falses) continue;
    if (!v && falses > trues) continue;
    out.push_back({text, v});
    if (v) ++trues;
  }
  return out;
}

struct BoolTaskFiles {
  std::string train, dev, test;
};

inline BoolTaskFiles write_bool_task(const std::string& dir, std::uint64_t seed, int n_train = 600,
                                     int n_dev = 200, int n_test = 200) {
  std::filesystem::create_directories(dir);
  const auto all = make_bool_examples(seed, n_train + n_dev + n_test);
  auto dump = [&](int lo, int hi) {
    std::string body;
    for (int i = lo; i < hi; ++i) body += all[static_cast<std::size_t>(i)].line + "\n";
    return body;
  };
  BoolTaskFiles f{dir + "/train.txt", dir + "/dev.txt", dir + "/test.txt"};
  write_file(f.train, dump(0, n_train));
  write_file(f.dev, dump(n_train, n_train + n_dev));
  write_file(f.test, dump(n_train + n_dev, n_train + n_dev + n_test));
  return f;
}

// ---------------------------------------------------------------------------
// fixed desk-scale protocols

// Overfit sanity protocol: 20 trees, d=16, AdaDelta defaults, root-only
// supervision, no dropout. Single-example batches give AdaDelta enough steps
// to ramp its update scale within the epoch budget.
inline RunConfig overfit_config(CellVariant v, const std::string& fixture_dir,
                                std::uint64_t seed) {
  RunConfig cfg;
  cfg.data.task = Task::sst5;
  cfg.data.train = fixture_dir + "/train.txt";
  cfg.data.dev = fixture_dir + "/dev.txt";
  cfg.data.test = fixture_dir + "/test.txt";
  cfg.variant = v;
  cfg.d = 16;
  cfg.n = 48;
  cfg.r = 8;
  cfg.s = 0;
  cfg.bs = 1;
  cfg.epochs = 200;
  cfg.patience = 200;
  cfg.seed = seed;
  cfg.per_node_supervision = false;
  cfg.fine_tune_embeddings = true;
  cfg.dropout = 0.0;
  return cfg;
}

// Boolean-expression protocol (learnability separation at desk scale).
inline RunConfig bool_task_config(CellVariant v, int d, int r, const std::string& dir,
                                  std::uint64_t seed) {
  RunConfig cfg;
  cfg.data.task = Task::sst5;
  cfg.data.train = dir + "/train.txt";
  cfg.data.dev = dir + "/dev.txt";
  cfg.data.test = dir + "/test.txt";
  cfg.variant = v;
  cfg.d = d;
  cfg.n = 16;
  cfg.r = r;
  cfg.s = 0;
  cfg.bs = 5;
  cfg.epochs = 30;
  cfg.patience = 30;
  cfg.seed = seed;
  cfg.per_node_supervision = false;
  cfg.fine_tune_embeddings = true;
  cfg.dropout = 0.0;
  return cfg;
}

inline std::size_t model_scalar_count(CellVariant v, int d, int n, int r, int s, int m) {
  ParamStore st;
  std::mt19937_64 rng(0);
  CellConfig cc;
  cc.variant = v;
  cc.d = d;
  cc.n = n;
  cc.r = r;
  CellParams::create(st, cc, rng);
  ClassifierHead::wire(st, d, s, m, &rng);
  return param_count(st).total();
}

// Child-Sum width whose leaf+cell+head scalar count comes closest to the
// given target (embeddings are identical across the comparison).
inline int matched_child_sum_dim(std::size_t target_total, int n, int s, int m,
                                 int max_d = 512) {
  int best_d = 1;
  std::size_t best_diff = static_cast<std::size_t>(-1);
  for (int d = 1; d <= max_d; ++d) {
    const std::size_t c = model_scalar_count(CellVariant::child_sum, d, n, 0, s, m);
    const std::size_t diff = c > target_total ? c - target_total : target_total - c;
    if (diff < best_diff) {
      best_diff = diff;
      best_d = d;
    }
  }
  return best_d;
}

// ---------------------------------------------------------------------------
// SICK-format fixture

// Template sentence pairs over a tiny vocabulary with heuristic relatedness
// scores and entailment classes, plus aligned pre-parsed trees and a matching
// GloVe-format embedding file. Enough to drive the full pair pipeline.
inline void write_sick_fixture(const std::string& dir, std::uint64_t seed, int pairs = 200,
                               int glove_dim = 20) {
  std::filesystem::create_directories(dir);
  static const std::vector<std::string> kNouns = {"dog", "cat", "bird", "horse", "child"};
  static const std::vector<std::string> kVerbs = {"chases", "watches", "follows", "greets"};
  static const std::vector<std::string> kMods = {"small", "happy", "quick", "quiet"};
  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<std::string>& v) {
    std::uniform_int_distribution<std::size_t> u(0, v.size() - 1);
    return v[u(rng)];
  };

  auto sentence = [](const std::string& subj_mod, const std::string& subj,
                     const std::string& verb, const std::string& obj) {
    return "the " + subj_mod + " " + subj + " " + verb + " the " + obj;
  };
  auto tree_line = [](const std::string& subj_mod, const std::string& subj,
                      const std::string& verb, const std::string& obj) {
    return "(ROOT (S (NP (DT the) (JJ " + subj_mod + ") (NN " + subj + ")) (VP (VBZ " + verb +
           ") (NP (DT the) (NN " + obj + ")))))";
  };

  std::string tsv = "pair_ID\tsentence_A\tsentence_B\trelatedness_score\t"
                    "entailment_judgment\tSemEval_set\n";
  std::string trees_a, trees_b;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < pairs; ++i) {
    const std::string mod_a = pick(kMods), subj_a = pick(kNouns), verb_a = pick(kVerbs),
                      obj_a = pick(kNouns);
    std::string mod_b = mod_a, subj_b = subj_a, verb_b = verb_a, obj_b = obj_a;
    const double kind = u(rng);
    std::string judgment;
    double score;
    if (kind < 0.34) {  // near-identical pair, modifier may vary
      if (u(rng) < 0.5) mod_b = pick(kMods);
      judgment = "ENTAILMENT";
      score = mod_b == mod_a ? 5.0 : 4.5;
    } else if (kind < 0.67) {  // same scene, different verb
      verb_b = pick(kVerbs);
      judgment = verb_b == verb_a ? "ENTAILMENT" : "NEUTRAL";
      score = verb_b == verb_a ? 5.0 : 3.4;
    } else {  // different participants
      subj_b = pick(kNouns);
      obj_b = pick(kNouns);
      mod_b = pick(kMods);
      const bool same = subj_b == subj_a && obj_b == obj_a && mod_b == mod_a;
      judgment = same ? "ENTAILMENT" : "CONTRADICTION";
      score = same ? 5.0 : 1.6;
    }
    const char* set = (i % 5 == 3) ? "TRIAL" : ((i % 5 == 4) ? "TEST" : "TRAIN");
    tsv += std::to_string(i + 1) + "\t" + sentence(mod_a, subj_a, verb_a, obj_a) + "\t" +
           sentence(mod_b, subj_b, verb_b, obj_b) + "\t" + fmt_fixed(score, 1) + "\t" +
           judgment + "\t" + set + "\n";
    trees_a += tree_line(mod_a, subj_a, verb_a, obj_a) + "\n";
    trees_b += tree_line(mod_b, subj_b, verb_b, obj_b) + "\n";
  }
  write_file(dir + "/SICK.txt", tsv);
  write_file(dir + "/SICK_A.ptb", trees_a);
  write_file(dir + "/SICK_B.ptb", trees_b);

  // matching GloVe-format file
  std::vector<std::string> vocab = {"the"};
  for (const auto* pool : {&kNouns, &kVerbs, &kMods})
    vocab.insert(vocab.end(), pool->begin(), pool->end());
  std::string glove;
  std::mt19937_64 grng(seed + 17);
  std::uniform_real_distribution<double> gv(-0.5, 0.5);
  for (const std::string& w : vocab) {
    glove += w;
    for (int k = 0; k < glove_dim; ++k) glove += " " + fmt_fixed(gv(grng), 4);
    glove += "\n";
  }
  write_file(dir + "/glove.txt", glove);
}

}  // namespace treecp
