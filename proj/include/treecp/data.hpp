#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "treecp/cells.hpp"
#include "treecp/tensor.hpp"
#include "treecp/tree.hpp"

namespace treecp {

enum class Split { train, dev, test };

enum class Task { sst5, sst2, trec, sick_r, sick_e };

inline bool is_pair_task(Task t) { return t == Task::sick_r || t == Task::sick_e; }

inline int task_class_count(Task t) {
  switch (t) {
    case Task::sst5: return 5;
    case Task::sst2: return 2;
    case Task::trec: return 6;
    case Task::sick_r: return 5;  // score classes 1..5
    case Task::sick_e: return 3;
  }
  return 0;
}

struct Example {
  Tree tree_a;
  std::optional<Tree> tree_b;
  int class_target = -1;
  double score_target = 0.0;
  Split split = Split::train;
};

// ---------------------------------------------------------------------------
// file helpers

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw format_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = s.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

inline bool blank(const std::string& s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

inline std::vector<Tree> parse_tree_file(const std::string& path) {
  std::vector<Tree> trees;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    try {
      trees.push_back(parse_ptb(lines[i]));
    } catch (const parse_error& e) {
      throw format_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return trees;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// vocabulary and embeddings

// Token table plus an embedding matrix; index 0 is the <unk> row used for
// words never seen in the corpus. Corpus tokens missing from the pretrained
// file keep their seeded uniform(-0.05, 0.05) rows.
struct Vocabulary {
  std::vector<std::string> tokens;  // tokens[0] == "<unk>"
  std::unordered_map<std::string, int> index;
  Tensor vectors;  // {V, n}
  int dim = 0;
  std::size_t matched = 0;        // corpus tokens found in the pretrained file
  std::size_t corpus_tokens = 0;  // corpus tokens requested

  int lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? 0 : it->second;
  }
};

namespace detail {
inline void collect_tree_tokens(const Tree& t, std::vector<std::string>& out,
                                std::unordered_set<std::string>& seen) {
  for (const Node& n : t.nodes)
    if (n.word && seen.insert(*n.word).second) out.push_back(*n.word);
}
}  // namespace detail

// Unique corpus tokens in first-seen order.
inline std::vector<std::string> collect_tokens(const std::vector<Example>& examples) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const Example& e : examples) {
    detail::collect_tree_tokens(e.tree_a, out, seen);
    if (e.tree_b) detail::collect_tree_tokens(*e.tree_b, out, seen);
  }
  return out;
}

namespace detail {
inline Vocabulary seeded_vocab(const std::vector<std::string>& corpus_tokens, int dim,
                               std::uint64_t seed, double scale) {
  Vocabulary v;
  v.dim = dim;
  v.tokens.push_back("<unk>");
  for (const std::string& t : corpus_tokens) v.tokens.push_back(t);
  for (std::size_t i = 0; i < v.tokens.size(); ++i)
    v.index[v.tokens[i]] = static_cast<int>(i);
  v.vectors = Tensor({v.tokens.size(), static_cast<std::size_t>(dim)});
  std::mt19937_64 rng(seed);
  init_uniform_range(v.vectors, -scale, scale, rng);
  v.corpus_tokens = corpus_tokens.size();
  return v;
}
}  // namespace detail

// Random embeddings only; used by synthetic tasks and as the fallback when no
// pretrained file is configured. Wider than the OOV rows of load_glove: with
// no pretrained vectors at all, words need enough initial spread to be
// distinguishable.
inline Vocabulary random_vocab(const std::vector<std::string>& corpus_tokens, int dim,
                               std::uint64_t seed) {
  return detail::seeded_vocab(corpus_tokens, dim, seed, 0.5);
}

// Loads pretrained vectors in the text format "token v1 ... vn" for the given
// corpus tokens. Rows are pre-seeded before the file is read, so OOV rows
// depend only on (seed, index) and not on the file's ordering.
inline Vocabulary load_glove(const std::string& path,
                             const std::vector<std::string>& corpus_tokens, int dim,
                             std::uint64_t seed) {
  Vocabulary v = detail::seeded_vocab(corpus_tokens, dim, seed, 0.05);
  std::ifstream in(path);
  if (!in) throw format_error("cannot open embedding file " + path);
  std::string line;
  std::size_t lineno = 0;
  std::unordered_set<int> filled;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto parts = detail::split_ws(line);
    if (parts.size() != static_cast<std::size_t>(dim) + 1)
      throw format_error(path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(dim) + " values, got " +
                         std::to_string(parts.size() - 1));
    auto it = v.index.find(parts[0]);
    if (it == v.index.end()) continue;
    for (int k = 0; k < dim; ++k) {
      try {
        v.vectors(static_cast<std::size_t>(it->second), static_cast<std::size_t>(k)) =
            std::stod(parts[static_cast<std::size_t>(k) + 1]);
      } catch (const std::exception&) {
        throw format_error(path + ":" + std::to_string(lineno) + ": bad number '" +
                           parts[static_cast<std::size_t>(k) + 1] + "'");
      }
    }
    if (filled.insert(it->second).second && it->second != 0) ++v.matched;
  }
  return v;
}

// ---------------------------------------------------------------------------
// dataset loaders

enum class SstGranularity { five, two };

// SST tree files: one tree per line, every node labeled 0..4. Binary
// granularity drops root-neutral sentences, maps {0,1} -> 0 and {3,4} -> 1,
// and unlabels neutral internal nodes.
inline std::vector<Example> load_sst(const std::string& path, SstGranularity g,
                                     Split split = Split::train) {
  std::vector<Example> out;
  const auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    Tree t;
    try {
      t = parse_ptb(lines[i]);
    } catch (const parse_error& e) {
      throw format_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    for (const Node& n : t.nodes)
      if (n.node_class && (*n.node_class < 0 || *n.node_class > 4))
        throw format_error(path + ":" + std::to_string(i + 1) + ": label " +
                           std::to_string(*n.node_class) + " outside 0-4");
    if (!t.at(t.root).node_class)
      throw format_error(path + ":" + std::to_string(i + 1) + ": unlabeled root");
    Example e;
    e.split = split;
    if (g == SstGranularity::five) {
      e.class_target = *t.at(t.root).node_class;
      e.tree_a = std::move(t);
    } else {
      const int root_class = *t.at(t.root).node_class;
      if (root_class == 2) continue;  // neutral sentences are removed
      for (Node& n : t.nodes) {
        if (!n.node_class) continue;
        if (*n.node_class == 2)
          n.node_class.reset();
        else
          n.node_class = *n.node_class < 2 ? 0 : 1;
      }
      e.class_target = root_class < 2 ? 0 : 1;
      e.tree_a = std::move(t);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline int sick_entailment_class(const std::string& judgment) {
  if (judgment == "NEUTRAL") return 0;
  if (judgment == "ENTAILMENT") return 1;
  if (judgment == "CONTRADICTION") return 2;
  throw format_error("unknown entailment judgment '" + judgment + "'");
}

// SICK TSV (pair_ID, sentence_A, sentence_B, relatedness_score,
// entailment_judgment, SemEval_set) with two row-aligned tree files holding
// the pre-parsed sentences.
inline std::vector<Example> load_sick(const std::string& tsv_path,
                                      const std::string& trees_a_path,
                                      const std::string& trees_b_path, Task mode) {
  if (mode != Task::sick_r && mode != Task::sick_e)
    throw usage_error("load_sick: mode must be sick_r or sick_e");
  const auto lines = detail::read_lines(tsv_path);
  const auto trees_a = detail::parse_tree_file(trees_a_path);
  const auto trees_b = detail::parse_tree_file(trees_b_path);

  std::vector<Example> out;
  std::size_t row = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    const auto cols = detail::split_tabs(lines[i]);
    if (i == 0 && !cols.empty() && cols[0] == "pair_ID") continue;  // header
    if (cols.size() < 6)
      throw format_error(tsv_path + ":" + std::to_string(i + 1) + ": expected 6 columns, got " +
                         std::to_string(cols.size()));
    if (row >= trees_a.size() || row >= trees_b.size())
      throw format_error(tsv_path + ": more rows than trees (" + std::to_string(row + 1) + ")");
    Example e;
    double score = 0.0;
    try {
      score = std::stod(cols[3]);
    } catch (const std::exception&) {
      throw format_error(tsv_path + ":" + std::to_string(i + 1) + ": bad score '" + cols[3] + "'");
    }
    if (score < 1.0 || score > 5.0)
      throw format_error(tsv_path + ":" + std::to_string(i + 1) + ": score " + cols[3] +
                         " outside [1,5]");
    const std::string& set = cols[5];
    if (set == "TRAIN")
      e.split = Split::train;
    else if (set == "TRIAL")
      e.split = Split::dev;
    else if (set == "TEST")
      e.split = Split::test;
    else
      throw format_error(tsv_path + ":" + std::to_string(i + 1) + ": unknown split '" + set + "'");
    e.score_target = score;
    e.class_target = sick_entailment_class(cols[4]);
    if (mode == Task::sick_e) e.score_target = 0.0;
    if (mode == Task::sick_r) e.class_target = -1;
    e.tree_a = trees_a[row];
    e.tree_b = trees_b[row];
    out.push_back(std::move(e));
    ++row;
  }
  if (row != trees_a.size() || row != trees_b.size())
    throw format_error(tsv_path + ": row count " + std::to_string(row) +
                       " does not match tree files");
  return out;
}

inline const std::vector<std::string>& trec_labels() {
  static const std::vector<std::string> labels = {"ABBR", "DESC", "ENTY",
                                                  "HUM",  "LOC",  "NUM"};
  return labels;
}

// TREC question files: "LABEL:subtype text" lines with a row-aligned tree
// file. The coarse label before the colon maps to one of six classes.
inline std::vector<Example> load_trec(const std::string& labels_path,
                                      const std::string& trees_path, Split split) {
  const auto lines = detail::read_lines(labels_path);
  const auto trees = detail::parse_tree_file(trees_path);
  std::vector<Example> out;
  std::size_t row = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    const std::size_t colon = lines[i].find(':');
    if (colon == std::string::npos)
      throw format_error(labels_path + ":" + std::to_string(i + 1) + ": missing ':' label");
    const std::string coarse = lines[i].substr(0, colon);
    const auto& labels = trec_labels();
    int cls = -1;
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == coarse) cls = static_cast<int>(k);
    if (cls < 0)
      throw format_error(labels_path + ":" + std::to_string(i + 1) + ": unknown label '" +
                         coarse + "'");
    if (row >= trees.size())
      throw format_error(labels_path + ": more rows than trees in " + trees_path);
    Example e;
    e.split = split;
    e.class_target = cls;
    e.tree_a = trees[row];
    out.push_back(std::move(e));
    ++row;
  }
  if (row != trees.size())
    throw format_error(labels_path + ": row count does not match " + trees_path);
  return out;
}

// ---------------------------------------------------------------------------
// targets

// Two-point distribution over score classes 1..m whose expectation equals the
// score exactly: mass s - floor(s) on ceil(s), the rest on floor(s).
inline Tensor sparse_target(double score, int m) {
  if (!(score >= 1.0 && score <= static_cast<double>(m)))
    throw usage_error("sparse_target: score " + std::to_string(score) + " outside [1," +
                      std::to_string(m) + "]");
  Tensor p({static_cast<std::size_t>(m)});
  const double lo = std::floor(score);
  const double frac = score - lo;
  const auto lo_idx = static_cast<std::size_t>(lo) - 1;
  if (frac == 0.0) {
    p[lo_idx] = 1.0;
  } else {
    p[lo_idx] = 1.0 - frac;
    p[lo_idx + 1] = frac;
  }
  return p;
}

// ---------------------------------------------------------------------------
// preprocessing

// Collapse always runs; the form then decides the structural transform.
inline Tree prepare_tree(const Tree& raw, TreeForm form,
                         CnfDirection dir = CnfDirection::right_branching) {
  Tree t = collapse_unary(raw);
  switch (form) {
    case TreeForm::nonbinary:
      return t;
    case TreeForm::binary:
      return binarize_cnf(t, dir);
    case TreeForm::treenet:
      return treenet_transform(t);
  }
  return t;
}

inline void prepare_examples(std::vector<Example>& examples, TreeForm form,
                             CnfDirection dir = CnfDirection::right_branching) {
  for (Example& e : examples) {
    e.tree_a = prepare_tree(e.tree_a, form, dir);
    if (e.tree_b) e.tree_b = prepare_tree(*e.tree_b, form, dir);
  }
}

}  // namespace treecp
