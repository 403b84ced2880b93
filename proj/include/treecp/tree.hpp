#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "treecp/common.hpp"

namespace treecp {

using NodeId = int;

// Token used when serializing the bottom (zero-state) pads produced by the
// TreeNet transform; the parser maps it back to a bottom node.
inline constexpr std::string_view kBottomToken = "-BOT-";

struct Node {
  std::optional<std::string> label;
  std::optional<std::string> word;
  std::optional<int> node_class;
  std::vector<NodeId> children;
  bool bottom = false;

  bool is_leaf() const { return children.empty(); }
};

// Ordered rooted tree over an arena. Nodes are allocated in preorder by the
// parser, so ids double as preorder positions in parsed trees.
struct Tree {
  std::vector<Node> nodes;
  NodeId root = -1;

  bool empty() const { return nodes.empty(); }
  std::size_t size() const { return nodes.size(); }
  const Node& at(NodeId id) const { return nodes[static_cast<std::size_t>(id)]; }
  Node& at(NodeId id) { return nodes[static_cast<std::size_t>(id)]; }

  NodeId add(Node n) {
    nodes.push_back(std::move(n));
    return static_cast<NodeId>(nodes.size() - 1);
  }

  std::size_t out_degree(NodeId id) const { return at(id).children.size(); }

  std::vector<std::string> leaf_words() const {
    std::vector<std::string> out;
    if (root < 0) return out;
    collect_words(root, out);
    return out;
  }

  std::size_t leaf_count() const {
    std::size_t n = 0;
    for (const Node& nd : nodes)
      if (nd.is_leaf()) ++n;
    return n;
  }

  std::size_t internal_count() const { return nodes.size() - leaf_count(); }

 private:
  void collect_words(NodeId id, std::vector<std::string>& out) const {
    const Node& n = at(id);
    if (n.is_leaf()) {
      if (n.word) out.push_back(*n.word);
      return;
    }
    for (NodeId c : n.children) collect_words(c, out);
  }
};

namespace detail {

// Leading "+"-component of a label; collapse joins labels top-down, so this
// is the label of the highest node in a collapsed chain.
inline std::optional<int> class_of_label(const std::string& label) {
  std::string_view head(label);
  if (auto pos = head.find('+'); pos != std::string_view::npos) head = head.substr(0, pos);
  if (head.empty()) return std::nullopt;
  int v = 0;
  for (char ch : head) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) return std::nullopt;
    v = v * 10 + (ch - '0');
  }
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Penn-Treebank S-expression parsing

namespace detail {

struct PtbParser {
  std::string_view text;
  std::size_t pos = 0;
  Tree tree;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  std::string token() {
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
      ++pos;
    if (pos == start) throw parse_error("expected token", start);
    return std::string(text.substr(start, pos - start));
  }

  NodeId parse_node() {
    skip_ws();
    if (pos >= text.size()) throw parse_error("unexpected end of input", pos);
    if (text[pos] != '(') {
      // bare token: a word leaf, or a serialized bottom pad
      std::string tok = token();
      Node n;
      if (tok == kBottomToken)
        n.bottom = true;
      else
        n.word = std::move(tok);
      return tree.add(n);
    }
    std::size_t open = pos;
    ++pos;  // '('
    skip_ws();
    if (pos >= text.size() || text[pos] == '(' || text[pos] == ')')
      throw parse_error("constituent without a label", open);
    std::string label = token();

    NodeId id = tree.add(Node{});  // preorder allocation
    tree.at(id).label = label;
    tree.at(id).node_class = class_of_label(label);

    std::vector<NodeId> children;
    while (true) {
      skip_ws();
      if (pos >= text.size()) throw parse_error("unbalanced parentheses", open);
      if (text[pos] == ')') {
        ++pos;
        break;
      }
      children.push_back(parse_node());
    }
    if (children.empty()) throw parse_error("empty constituent", open);

    if (children.size() == 1 && tree.at(children[0]).is_leaf() &&
        tree.at(children[0]).word && !tree.at(children[0]).label) {
      // preterminal "(TAG word)": fold the bare token into this node
      Node& n = tree.at(id);
      n.word = tree.at(children[0]).word;
      // the bare-token node stays in the arena but unreferenced; compact below
    } else {
      tree.at(id).children = std::move(children);
    }
    return id;
  }
};

inline Tree compact(const Tree& t) {
  Tree out;
  if (t.root < 0) return out;
  // rebuild in preorder, dropping unreachable arena entries
  struct Rec {
    const Tree& in;
    Tree& dst;
    NodeId copy(NodeId id) {
      Node n = in.at(id);
      std::vector<NodeId> kids = std::move(n.children);
      n.children.clear();
      NodeId nid = dst.add(std::move(n));
      std::vector<NodeId> mapped;
      mapped.reserve(kids.size());
      for (NodeId k : kids) mapped.push_back(copy(k));
      dst.at(nid).children = std::move(mapped);
      return nid;
    }
  } rec{t, out};
  out.root = rec.copy(t.root);
  return out;
}

}  // namespace detail

// Parses one tree from an S-expression line. Labels whose leading
// "+"-component is an integer (the SST convention) also set node_class.
inline Tree parse_ptb(std::string_view text) {
  detail::PtbParser p{text, 0, {}};
  p.skip_ws();
  if (p.pos >= p.text.size()) throw parse_error("empty input", 0);
  if (p.text[p.pos] != '(') throw parse_error("expected '('", p.pos);
  NodeId root = p.parse_node();
  if (!p.at_end()) throw parse_error("trailing content after tree", p.pos);
  p.tree.root = root;
  return detail::compact(p.tree);
}

namespace detail {
inline void serialize_node(const Tree& t, NodeId id, std::string& out) {
  const Node& n = t.at(id);
  if (n.bottom) {
    out += kBottomToken;
    return;
  }
  if (n.is_leaf()) {
    if (n.label) {
      out += '(';
      out += *n.label;
      out += ' ';
      out += n.word ? *n.word : std::string();
      out += ')';
    } else {
      out += n.word ? *n.word : std::string();
    }
    return;
  }
  out += '(';
  out += n.label ? *n.label : std::string("_");
  for (NodeId c : n.children) {
    out += ' ';
    serialize_node(t, c, out);
  }
  out += ')';
}
}  // namespace detail

inline std::string serialize(const Tree& t) {
  std::string out;
  if (t.root >= 0) detail::serialize_node(t, t.root, out);
  return out;
}

inline bool structurally_equal(const Tree& a, NodeId ia, const Tree& b, NodeId ib) {
  const Node& na = a.at(ia);
  const Node& nb = b.at(ib);
  if (na.label != nb.label || na.word != nb.word || na.node_class != nb.node_class ||
      na.bottom != nb.bottom || na.children.size() != nb.children.size())
    return false;
  for (std::size_t i = 0; i < na.children.size(); ++i)
    if (!structurally_equal(a, na.children[i], b, nb.children[i])) return false;
  return true;
}

inline bool structurally_equal(const Tree& a, const Tree& b) {
  if ((a.root < 0) != (b.root < 0)) return false;
  if (a.root < 0) return true;
  return structurally_equal(a, a.root, b, b.root);
}

// ---------------------------------------------------------------------------
// transforms

namespace detail {

inline std::string join_labels(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += '+';
    out += p;
  }
  return out;
}

struct Collapser {
  const Tree& in;
  Tree out;

  NodeId run(NodeId id) {
    std::vector<std::string> labels;
    std::optional<int> cls;
    NodeId cur = id;
    // descend through single-child internals, collecting labels top-down
    while (!in.at(cur).is_leaf() && in.at(cur).children.size() == 1) {
      const Node& n = in.at(cur);
      if (n.label) labels.push_back(*n.label);
      if (!cls && n.node_class) cls = n.node_class;
      cur = n.children[0];
    }
    const Node& tail = in.at(cur);
    if (tail.is_leaf()) {
      Node leaf;
      leaf.word = tail.word;
      leaf.bottom = tail.bottom;
      if (tail.label) labels.push_back(*tail.label);
      if (!cls && tail.node_class) cls = tail.node_class;
      if (!labels.empty()) leaf.label = join_labels(labels);
      leaf.node_class = cls;
      return out.add(std::move(leaf));
    }
    Node merged;
    if (tail.label) labels.push_back(*tail.label);
    if (!cls && tail.node_class) cls = tail.node_class;
    if (!labels.empty()) merged.label = join_labels(labels);
    merged.node_class = cls;
    NodeId nid = out.add(std::move(merged));
    std::vector<NodeId> kids;
    kids.reserve(tail.children.size());
    for (NodeId c : tail.children) kids.push_back(run(c));
    out.at(nid).children = std::move(kids);
    return nid;
  }
};

}  // namespace detail

// Removes unary chains: labels along a chain join with '+', the class of the
// highest class-bearing node in the chain survives, chains ending in a leaf
// collapse into the leaf itself.
inline Tree collapse_unary(const Tree& t) {
  if (t.root < 0) return t;
  detail::Collapser c{t, {}};
  c.out.root = c.run(t.root);
  return c.out;
}

enum class CnfDirection {
  // Fig-style default: left child = first sibling, right child = synthetic
  // node over the remaining siblings, applied recursively.
  right_branching,
  left_branching,
};

namespace detail {

struct Binarizer {
  const Tree& in;
  CnfDirection dir;
  Tree out;

  NodeId chain(const std::string& synth_label, const std::vector<NodeId>& kids,
               std::size_t lo, std::size_t hi) {
    // kids[lo..hi] inclusive, at least two entries
    if (hi - lo == 1) {
      Node n;
      n.label = synth_label;
      NodeId nid = out.add(std::move(n));
      out.at(nid).children = {kids[lo], kids[hi]};
      return nid;
    }
    Node n;
    n.label = synth_label;
    NodeId nid = out.add(std::move(n));
    if (dir == CnfDirection::right_branching)
      out.at(nid).children = {kids[lo], chain(synth_label, kids, lo + 1, hi)};
    else
      out.at(nid).children = {chain(synth_label, kids, lo, hi - 1), kids[hi]};
    return nid;
  }

  NodeId run(NodeId id) {
    const Node& n = in.at(id);
    if (n.is_leaf()) return out.add(n);
    Node copy = n;
    copy.children.clear();
    NodeId nid = out.add(std::move(copy));
    std::vector<NodeId> kids;
    kids.reserve(n.children.size());
    for (NodeId c : n.children) kids.push_back(run(c));
    if (kids.size() <= 2) {
      out.at(nid).children = std::move(kids);
      return nid;
    }
    const std::string synth = "@" + (n.label ? *n.label : std::string());
    if (dir == CnfDirection::right_branching)
      out.at(nid).children = {kids[0], chain(synth, kids, 1, kids.size() - 1)};
    else
      out.at(nid).children = {chain(synth, kids, 0, kids.size() - 2), kids.back()};
    return nid;
  }
};

}  // namespace detail

// Chomsky-normal-form binarization. A node with L >= 3 children gains L-2
// synthetic "@label" nodes; synthetic nodes never carry a class.
inline Tree binarize_cnf(const Tree& t, CnfDirection dir = CnfDirection::right_branching) {
  if (t.root < 0) return t;
  detail::Binarizer b{t, dir, {}};
  b.out.root = b.run(t.root);
  return b.out;
}

namespace detail {

struct TreenetTransformer {
  const Tree& in;
  Tree out;

  NodeId bottom() {
    Node n;
    n.bottom = true;
    return out.add(std::move(n));
  }

  // Unrolls a constituent into a left-sibling chain: step k pairs the chain
  // so far (bottom for the first child) with child k's subtree. The final
  // step carries the constituent's label and class.
  NodeId run(NodeId id) {
    const Node& n = in.at(id);
    if (n.is_leaf()) return out.add(n);
    NodeId prev = bottom();
    const std::string base = n.label ? *n.label : std::string();
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      NodeId sub = run(n.children[k]);
      Node step;
      const bool last = (k + 1 == n.children.size());
      step.label = last ? n.label : std::optional<std::string>("@" + base);
      step.node_class = last ? n.node_class : std::nullopt;
      NodeId sid = out.add(std::move(step));
      out.at(sid).children = {prev, sub};
      prev = sid;
    }
    return prev;
  }
};

}  // namespace detail

// TreeNet evaluation order: binary tree where each node pairs its left
// sibling (or a bottom pad) with one child subtree; a top-level node pairs a
// bottom pad with the original root.
inline Tree treenet_transform(const Tree& t) {
  if (t.root < 0) return t;
  detail::TreenetTransformer tr{t, {}};
  NodeId body = tr.run(t.root);
  NodeId pad = tr.bottom();
  Node top;
  top.label = "@TOP";
  NodeId tid = tr.out.add(std::move(top));
  tr.out.at(tid).children = {pad, body};
  tr.out.root = tid;
  return tr.out;
}

// ---------------------------------------------------------------------------
// validation and statistics

enum class TreeMode { nonbinary, binary };

struct Violation {
  NodeId node;
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Violations are data, not errors: the report lists out-degree breaches,
// missing/misplaced words, dangling ids, sharing and unreachable nodes.
inline ValidationReport validate(const Tree& t, TreeMode mode) {
  ValidationReport rep;
  auto flag = [&rep](NodeId id, std::string what) {
    rep.violations.push_back({id, std::move(what)});
  };
  if (t.root < 0 || static_cast<std::size_t>(t.root) >= t.size()) {
    if (!t.nodes.empty() || t.root >= 0) flag(t.root, "root id out of range");
    return rep;
  }
  const NodeId n = static_cast<NodeId>(t.size());
  std::vector<int> indegree(t.size(), 0);
  for (NodeId id = 0; id < n; ++id) {
    for (NodeId c : t.at(id).children) {
      if (c < 0 || c >= n) {
        flag(id, "dangling child id " + std::to_string(c));
        continue;
      }
      ++indegree[static_cast<std::size_t>(c)];
    }
  }
  for (NodeId id = 0; id < n; ++id) {
    if (id != t.root && indegree[static_cast<std::size_t>(id)] == 0)
      flag(id, "unreachable node");
    if (indegree[static_cast<std::size_t>(id)] > 1)
      flag(id, "node has multiple parents");
  }
  if (indegree[static_cast<std::size_t>(t.root)] != 0)
    flag(t.root, "root has a parent (cycle)");

  for (NodeId id = 0; id < n; ++id) {
    const Node& nd = t.at(id);
    if (nd.is_leaf()) {
      if (!nd.bottom && !nd.word) flag(id, "leaf without a word");
      if (nd.bottom && nd.word) flag(id, "bottom node carries a word");
    } else {
      if (nd.word) flag(id, "internal node carries a word");
      if (nd.bottom) flag(id, "bottom node has children");
      if (mode == TreeMode::binary && nd.children.size() != 2)
        flag(id, "out-degree " + std::to_string(nd.children.size()) + " in binary mode");
    }
  }
  return rep;
}

struct CorpusStats {
  std::map<std::size_t, std::size_t> out_degree_histogram;  // internal nodes
  std::size_t labeled_node_count = 0;                       // nodes with a class
  std::size_t leaf_count = 0;
  std::map<std::size_t, std::size_t> depth_histogram;  // all nodes, root depth 0
  std::size_t tree_count = 0;
  std::size_t node_count = 0;
};

namespace detail {
inline void stats_walk(const Tree& t, NodeId id, std::size_t depth, CorpusStats& s) {
  const Node& n = t.at(id);
  ++s.node_count;
  ++s.depth_histogram[depth];
  if (n.node_class) ++s.labeled_node_count;
  if (n.is_leaf()) {
    ++s.leaf_count;
    return;
  }
  ++s.out_degree_histogram[n.children.size()];
  for (NodeId c : n.children) stats_walk(t, c, depth + 1, s);
}
}  // namespace detail

inline CorpusStats corpus_stats(const std::vector<Tree>& trees) {
  CorpusStats s;
  for (const Tree& t : trees) {
    if (t.root < 0) continue;
    ++s.tree_count;
    detail::stats_walk(t, t.root, 0, s);
  }
  return s;
}

}  // namespace treecp
