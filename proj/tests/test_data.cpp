#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "treecp/config.hpp"
#include "treecp/data.hpp"
#include "treecp/runio.hpp"
#include "treecp/synthetic.hpp"

using namespace treecp;

namespace {

std::string scratch_dir() {
  static const std::string dir =
      (std::filesystem::temp_directory_path() / "treecp_data_tests").string();
  std::filesystem::create_directories(dir);
  return dir;
}

std::string fixture(const std::string& name, const std::string& content) {
  const std::string path = scratch_dir() + "/" + name;
  write_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("load_glove: coverage, OOV rows, and errors") {
  const std::string path = fixture("glove.txt",
                                   "cat 0.1 0.2 0.3\n"
                                   "dog -0.1 0.0 0.5\n"
                                   "unused 1 1 1\n");
  SECTION("full coverage") {
    Vocabulary v = load_glove(path, {"cat", "dog"}, 3, 7);
    REQUIRE(v.matched == 2);
    REQUIRE(v.corpus_tokens == 2);
    const int cat = v.lookup("cat");
    REQUIRE(v.vectors(static_cast<std::size_t>(cat), 0) == Catch::Approx(0.1));
  }
  SECTION("missing token gets a seeded OOV row") {
    Vocabulary v = load_glove(path, {"cat", "yak"}, 3, 7);
    REQUIRE(v.matched == 1);
    const int yak = v.lookup("yak");
    REQUIRE(yak != 0);  // its own row, not <unk>
    for (std::size_t k = 0; k < 3; ++k) {
      const double x = v.vectors(static_cast<std::size_t>(yak), k);
      REQUIRE(std::abs(x) <= 0.05);
    }
    // OOV rows depend only on (seed, index): reload reproduces them
    Vocabulary v2 = load_glove(path, {"cat", "yak"}, 3, 7);
    REQUIRE(v2.vectors(static_cast<std::size_t>(yak), 0) ==
            v.vectors(static_cast<std::size_t>(yak), 0));
  }
  SECTION("coverage equals a set-intersection oracle") {
    const std::vector<std::string> corpus = {"cat", "dog", "yak", "emu"};
    Vocabulary v = load_glove(path, corpus, 3, 7);
    std::set<std::string> file_tokens = {"cat", "dog", "unused"};
    std::size_t expect = 0;
    for (const auto& tok : corpus)
      if (file_tokens.count(tok)) ++expect;
    REQUIRE(v.matched == expect);
  }
  SECTION("wrong dimensionality raises with a line number") {
    const std::string bad = fixture("glove_bad.txt", "cat 0.1 0.2\n");
    try {
      load_glove(bad, {"cat"}, 3, 7);
      FAIL("expected format_error");
    } catch (const format_error& e) {
      REQUIRE(std::string(e.what()).find(":1") != std::string::npos);
    }
  }
  SECTION("malformed number raises") {
    const std::string bad = fixture("glove_nan.txt", "cat 0.1 frog 0.3\n");
    REQUIRE_THROWS_AS(load_glove(bad, {"cat"}, 3, 7), format_error);
  }
  SECTION("unknown word resolves to <unk>") {
    Vocabulary v = load_glove(path, {"cat"}, 3, 7);
    REQUIRE(v.lookup("never-seen") == 0);
  }
}

TEST_CASE("load_sst: granularities and label mapping") {
  const std::string path = fixture("sst.txt",
                                   "(3 (2 good) (4 film))\n"
                                   "(2 (2 plain) (2 movie))\n"
                                   "(0 (1 awful) (2 mess))\n");
  SECTION("five keeps everything") {
    auto ex = load_sst(path, SstGranularity::five);
    REQUIRE(ex.size() == 3);
    REQUIRE(ex[0].class_target == 3);
    REQUIRE(ex[1].class_target == 2);
    REQUIRE(ex[2].class_target == 0);
  }
  SECTION("two drops root-neutral sentences and remaps labels") {
    auto ex = load_sst(path, SstGranularity::two);
    REQUIRE(ex.size() == 2);  // the root-2 sentence is removed, nothing else
    REQUIRE(ex[0].class_target == 1);
    REQUIRE(ex[1].class_target == 0);
    // neutral internal labels are cleared, others remapped to {0,1}
    for (const Example& e : ex)
      for (const Node& n : e.tree_a.nodes)
        if (n.node_class) REQUIRE((*n.node_class == 0 || *n.node_class == 1));
  }
  SECTION("label outside 0-4 raises") {
    const std::string bad = fixture("sst_bad.txt", "(7 (2 x) (2 y))\n");
    REQUIRE_THROWS_AS(load_sst(bad, SstGranularity::five), format_error);
  }
}

TEST_CASE("labeled-node accounting through the preprocessing pipeline") {
  // collapse merges labeled chain nodes; binarization adds only unlabeled
  // synthetic nodes. An independent chain-walk predicts both counts.
  std::mt19937_64 rng(3);
  std::vector<Tree> sample;
  for (int i = 0; i < 10; ++i) sample.push_back(random_tree(rng, 4, 4, 1));

  auto labeled = [](const Tree& t) {
    std::size_t n = 0;
    for (const Node& nd : t.nodes)
      if (nd.node_class) ++n;
    return n;
  };

  for (const Tree& raw : sample) {
    const Tree collapsed = collapse_unary(raw);
    const Tree binarized = binarize_cnf(collapsed);
    REQUIRE(labeled(binarized) == labeled(collapsed));  // synthetics carry no class

    // every node in these trees is labeled, so each maximal unary chain of k
    // unary nodes plus its tail keeps exactly one label: k labels disappear.
    std::size_t unary_nodes = 0;
    for (const Node& nd : raw.nodes)
      if (!nd.is_leaf() && nd.children.size() == 1) ++unary_nodes;
    REQUIRE(labeled(raw) - labeled(collapsed) == unary_nodes);
  }
}

TEST_CASE("load_sick: targets, classes, splits") {
  const std::string tsv = fixture(
      "sick.tsv",
      "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\tSemEval_set\n"
      "1\ta dog runs\ta cat runs\t4.5\tNEUTRAL\tTRAIN\n"
      "2\ta dog runs\ta dog runs\t5.0\tENTAILMENT\tTRAIN\n"
      "3\ta dog runs\tno dog runs\t1.2\tCONTRADICTION\tTRIAL\n"
      "4\ta cat sits\ta dog sits\t3.3\tNEUTRAL\tTEST\n");
  const std::string ta = fixture("sick_a.ptb",
                                 "(S (DT a) (NN dog) (VBZ runs))\n"
                                 "(S (DT a) (NN dog) (VBZ runs))\n"
                                 "(S (DT a) (NN dog) (VBZ runs))\n"
                                 "(S (DT a) (NN cat) (VBZ sits))\n");
  const std::string tb = fixture("sick_b.ptb",
                                 "(S (DT a) (NN cat) (VBZ runs))\n"
                                 "(S (DT a) (NN dog) (VBZ runs))\n"
                                 "(S (DT no) (NN dog) (VBZ runs))\n"
                                 "(S (DT a) (NN dog) (VBZ sits))\n");

  auto rel = load_sick(tsv, ta, tb, Task::sick_r);
  REQUIRE(rel.size() == 4);
  REQUIRE(rel[0].score_target == Catch::Approx(4.5));
  REQUIRE(rel[0].tree_b.has_value());

  auto ent = load_sick(tsv, ta, tb, Task::sick_e);
  REQUIRE(ent[0].class_target == 0);
  REQUIRE(ent[1].class_target == 1);
  REQUIRE(ent[2].class_target == 2);

  // split sizes match a line-count oracle
  std::size_t train = 0, dev = 0, test = 0;
  for (const Example& e : ent) {
    if (e.split == Split::train) ++train;
    if (e.split == Split::dev) ++dev;
    if (e.split == Split::test) ++test;
  }
  REQUIRE(train == 2);
  REQUIRE(dev == 1);
  REQUIRE(test == 1);

  SECTION("missing column raises") {
    const std::string bad = fixture("sick_bad.tsv", "1\tonly\tthree\n");
    REQUIRE_THROWS_AS(load_sick(bad, ta, tb, Task::sick_r), format_error);
  }
  SECTION("unknown judgment raises") {
    const std::string bad =
        fixture("sick_bad2.tsv", "1\ta\tb\t3.0\tMAYBE\tTRAIN\n");
    const std::string one = fixture("one.ptb", "(S (DT a) (NN b) (VBZ c))\n");
    REQUIRE_THROWS_AS(load_sick(bad, one, one, Task::sick_e), format_error);
  }
}

TEST_CASE("load_trec: labels, histogram, errors") {
  const std::string labels = fixture("trec.txt",
                                     "LOC:city Where is X ?\n"
                                     "NUM:count How many Y ?\n"
                                     "HUM:ind Who did Z ?\n"
                                     "LOC:other Where to ?\n"
                                     "ABBR:exp What does A stand for ?\n"
                                     "DESC:def What is B ?\n"
                                     "ENTY:animal What animal ?\n");
  std::string trees;
  for (int i = 0; i < 7; ++i) trees += "(S (WP what) (NN thing))\n";
  const std::string tree_path = fixture("trec.ptb", trees);

  auto ex = load_trec(labels, tree_path, Split::train);
  REQUIRE(ex.size() == 7);
  REQUIRE(ex[0].class_target == 4);  // LOC
  REQUIRE(ex[1].class_target == 5);  // NUM

  std::map<int, int> hist;
  for (const Example& e : ex) ++hist[e.class_target];
  // independent count: LOC twice, everything else once
  REQUIRE(hist[4] == 2);
  REQUIRE(hist.size() == 6);

  const std::string bad = fixture("trec_bad.txt", "WHAT:x huh ?\n");
  const std::string one = fixture("trec_one.ptb", "(S (WP what))\n");
  REQUIRE_THROWS_AS(load_trec(bad, one, Split::train), format_error);
}

TEST_CASE("sparse_target: endpoints, midpoint, exactness") {
  Tensor p3 = sparse_target(3.0, 5);
  REQUIRE(p3[2] == 1.0);
  for (std::size_t i : {0u, 1u, 3u, 4u}) REQUIRE(p3[i] == 0.0);

  Tensor p45 = sparse_target(4.5, 5);
  REQUIRE(p45[3] == Catch::Approx(0.5));
  REQUIRE(p45[4] == Catch::Approx(0.5));
  REQUIRE(p45[0] == 0.0);

  for (int k = 10; k <= 50; ++k) {
    const double s = k / 10.0;
    Tensor p = sparse_target(s, 5);
    double expect = 0.0, mass = 0.0;
    for (int c = 0; c < 5; ++c) {
      expect += (c + 1) * p[static_cast<std::size_t>(c)];
      mass += p[static_cast<std::size_t>(c)];
    }
    REQUIRE(std::abs(expect - s) < 1e-12);
    REQUIRE(std::abs(mass - 1.0) < 1e-12);
  }

  REQUIRE_THROWS_AS(sparse_target(0.5, 5), usage_error);
  REQUIRE_THROWS_AS(sparse_target(5.1, 5), usage_error);
}

TEST_CASE("loaders are deterministic given file bytes") {
  write_sick_fixture(scratch_dir() + "/sickfix", 11, 30);
  const std::string dir = scratch_dir() + "/sickfix";
  auto a = load_sick(dir + "/SICK.txt", dir + "/SICK_A.ptb", dir + "/SICK_B.ptb", Task::sick_r);
  auto b = load_sick(dir + "/SICK.txt", dir + "/SICK_A.ptb", dir + "/SICK_B.ptb", Task::sick_r);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].score_target == b[i].score_target);
    REQUIRE(serialize(a[i].tree_a) == serialize(b[i].tree_a));
    REQUIRE(serialize(*a[i].tree_b) == serialize(*b[i].tree_b));
  }
}

TEST_CASE("relative dataset paths resolve against TREECP_DATA_ROOT") {
  setenv("TREECP_DATA_ROOT", "/data/root", 1);
  REQUIRE(resolve_data_path("sst/train.txt") == "/data/root/sst/train.txt");
  REQUIRE(resolve_data_path("/abs/train.txt") == "/abs/train.txt");
  REQUIRE(resolve_data_path("").empty());
  unsetenv("TREECP_DATA_ROOT");
  REQUIRE(resolve_data_path("sst/train.txt") == "sst/train.txt");
}

TEST_CASE("prepare_examples applies the variant tree form") {
  auto ex = load_sst(fixture("prep.txt", "(3 (2 (2 a) (2 b) (2 c)) (2 d))\n"),
                     SstGranularity::five);
  auto binary = ex;
  prepare_examples(binary, TreeForm::binary);
  REQUIRE(validate(binary[0].tree_a, TreeMode::binary).ok());
  auto treenet = ex;
  prepare_examples(treenet, TreeForm::treenet);
  bool has_bottom = false;
  for (const Node& n : treenet[0].tree_a.nodes) has_bottom = has_bottom || n.bottom;
  REQUIRE(has_bottom);
}
