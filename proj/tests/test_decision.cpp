#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "aligntree/decision.hpp"
#include "support.hpp"

using namespace aligntree;
using testsupport::abe_vocab;

namespace {

struct World {
  Vocabulary vocab = abe_vocab();
  std::shared_ptr<TabularLM> strong, aligned, reference;
  World(std::uint64_t seed, int order = 8) {
    Rng rng(seed);
    strong = testsupport::random_lm("strong", vocab, order, rng);
    aligned = testsupport::random_lm("aligned", vocab, order, rng);
    reference = testsupport::random_lm("reference", vocab, order, rng);
  }
  WeakPair pair() const { return WeakPair(aligned, reference); }
};

SearchConfig exhaustive_config(const Vocabulary& vocab, int cap) {
  SearchConfig cfg;
  cfg.chunk_length = 1;
  cfg.pool_size = vocab.size();
  cfg.expand_width = vocab.size();
  cfg.max_new_tokens = cap;
  cfg.iterations = 4096;
  cfg.sampling = SamplingParams{0.7, 0, 1.0};
  cfg.seed = 2;
  return cfg;
}

}  // namespace

TEST_CASE("collect_terminals on hand-built trees") {
  SearchTree empty({0});
  CHECK(collect_terminals(empty).empty());

  // single path ending in EOS
  SearchTree path({0});
  int a = path.add_child(0, {1}, 0.5, 0.1, false);
  int b = path.add_child(a, {2}, 0.5, 0.0, true);
  auto terminals = collect_terminals(path);
  REQUIRE(terminals.size() == 1);
  CHECK(terminals[0].first == b);
  CHECK(terminals[0].second == TokenSequence{1, 2});
}

TEST_CASE("collect_terminals equals brute-force enumeration on exhaustive trees") {
  World world(51);
  const int cap = 3;
  SearchTree tree = run_search({0}, *world.strong, world.pair(),
                               exhaustive_config(world.vocab, cap));
  auto terminals = collect_terminals(tree);
  std::set<TokenSequence> found;
  for (const auto& [id, seq] : terminals) {
    CHECK(tree.node(id).terminal);
    CHECK(tree.continuation_of(id) == seq);
    found.insert(seq);
  }
  auto expected_list = testsupport::enumerate_complete(world.vocab, cap);
  CHECK(found == std::set<TokenSequence>(expected_list.begin(), expected_list.end()));
  CHECK(terminals.size() == expected_list.size());  // no duplicates
}

TEST_CASE("penultimate_nodes: dedup, root case, empty case") {
  SearchTree none({0});
  CHECK(penultimate_nodes(none).empty());

  SearchTree shared({0});
  int p = shared.add_child(0, {0}, 0.5, 0.1, false);
  shared.add_child(p, {2}, 0.4, 0.0, true);
  shared.add_child(p, {1, 2}, 0.4, 0.0, true);
  CHECK(penultimate_nodes(shared) == std::vector<int>{p});

  // root's direct terminal child makes the root penultimate
  SearchTree direct({0});
  direct.add_child(0, {2}, 0.9, 0.0, true);
  CHECK(penultimate_nodes(direct) == std::vector<int>{0});
}

TEST_CASE("decide: single candidate, argmax, fallback") {
  World world(52);
  WeakPair pair = world.pair();

  // single terminal candidate
  SearchTree one({0});
  int a = one.add_child(0, {1}, 0.5, 0.1, false);
  one.node(a).best_return = 0.25;
  int t = one.add_child(a, {2}, 0.5, 0.0, true);
  DecisionResult single = decide(one, pair, 4);
  CHECK(!single.used_fallback);
  CHECK(single.best_node == t);
  CHECK(single.best == TokenSequence{1, 2});
  CHECK(single.candidates.size() == 1);
}

TEST_CASE("decide fallback returns the highest-return live prefix") {
  World world(53);
  WeakPair pair = world.pair();
  SearchTree tree({0});
  int a = tree.add_child(0, {0}, 0.5, 0.1, false);
  int b = tree.add_child(0, {1}, 0.5, 0.1, false);
  int c = tree.add_child(a, {1}, 0.5, 0.1, false);
  tree.node(a).best_return = 0.2;
  tree.node(b).best_return = -0.5;
  tree.node(c).best_return = 0.9;
  DecisionResult result = decide(tree, pair, 4);
  CHECK(result.used_fallback);
  CHECK(result.best_node == c);
  CHECK(result.best == TokenSequence{0, 1});
  CHECK(result.candidates.empty());

  CHECK_THROWS_AS(decide(SearchTree({0}), pair, 4), EmptyTreeError);
}

TEST_CASE("decide picks the global-score argmax among top-M candidates") {
  World world(54);
  WeakPair pair = world.pair();
  const int cap = 3;
  SearchTree tree = run_search({1}, *world.strong, pair, exhaustive_config(world.vocab, cap));

  DecisionResult all = decide(tree, pair, std::numeric_limits<int>::max());
  CHECK(!all.used_fallback);

  // every considered candidate scores <= the winner
  for (const Candidate& cand : all.candidates) {
    CHECK(cand.global <= global_score(pair, tree.prompt(), all.best) + 1e-12);
    CHECK(cand.sequence == tree.continuation_of(cand.terminal_node));
    CHECK(tree.node(cand.terminal_node).parent == cand.penultimate_node);
  }

  // with M = infinity and an exhausted tree this is the brute-force argmax
  double best = -std::numeric_limits<double>::infinity();
  TokenSequence best_seq;
  for (const auto& seq : testsupport::enumerate_complete(world.vocab, cap)) {
    double score = global_score(pair, tree.prompt(), seq);
    if (score > best) {
      best = score;
      best_seq = seq;
    }
  }
  CHECK(all.best == best_seq);
  CHECK(global_score(pair, tree.prompt(), all.best) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("decide restricts candidates to the top-M penultimate nodes") {
  World world(55);
  WeakPair pair = world.pair();
  SearchTree tree = run_search({0}, *world.strong, pair, exhaustive_config(world.vocab, 3));

  auto pen = penultimate_nodes(tree);
  REQUIRE(pen.size() > 1);
  DecisionResult top1 = decide(tree, pair, 1);

  // all candidates come from a single penultimate node: the one with max R
  std::set<int> used;
  for (const Candidate& cand : top1.candidates) used.insert(cand.penultimate_node);
  CHECK(used.size() == 1);
  double max_r = -std::numeric_limits<double>::infinity();
  for (int id : pen) max_r = std::max(max_r, tree.node(id).best_return);
  CHECK(tree.node(*used.begin()).best_return == max_r);
}

TEST_CASE("decision_report carries every candidate's return and score") {
  World world(56);
  WeakPair pair = world.pair();
  SearchTree tree = run_search({0}, *world.strong, pair, exhaustive_config(world.vocab, 2));
  DecisionResult result = decide(tree, pair, 3);
  nlohmann::json doc = nlohmann::json::parse(decision_report(result, world.vocab));
  CHECK(doc.at("best").get<std::string>() == render(world.vocab, result.best));
  CHECK(doc.at("used_fallback") == result.used_fallback);
  REQUIRE(doc.at("candidates").size() == result.candidates.size());
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& rec = doc.at("candidates").at(i);
    CHECK(rec.at("global_score").get<double>() == result.candidates[i].global);
    CHECK(rec.at("penultimate_node").get<int>() == result.candidates[i].penultimate_node);
  }
}

TEST_CASE("decide never returns tokens after EOS") {
  Rng meta(77);
  for (int trial = 0; trial < 40; ++trial) {
    World world(600 + trial);
    WeakPair pair = world.pair();
    SearchConfig cfg;
    cfg.iterations = 1 + static_cast<int>(meta.next_u64() % 10);
    cfg.pool_size = 3;
    cfg.expand_width = 1 + static_cast<int>(meta.next_u64() % 3);
    cfg.chunk_length = 1 + static_cast<int>(meta.next_u64() % 3);
    cfg.max_new_tokens = 1 + static_cast<int>(meta.next_u64() % 5);
    cfg.sampling = SamplingParams{0.7, 0, 1.0};
    cfg.seed = meta.next_u64();
    SearchTree tree = run_search({1}, *world.strong, pair, cfg);
    DecisionResult result = decide(tree, pair, 1 + static_cast<int>(meta.next_u64() % 4));
    CHECK_NOTHROW(validate_sequence(world.vocab, result.best));
    CHECK(result.used_fallback == collect_terminals(tree).empty());
    if (!result.used_fallback) {
      CHECK((ends_in_eos(world.vocab, result.best) ||
             static_cast<int>(result.best.size()) == cfg.max_new_tokens));
    }
  }
}
