#include "aligntree/decision.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace aligntree {

namespace {

void dfs_terminals(const SearchTree& tree, int id, TokenSequence& prefix,
                   std::vector<std::pair<int, TokenSequence>>& out) {
  const SearchNode& n = tree.node(id);
  prefix.insert(prefix.end(), n.chunk.begin(), n.chunk.end());
  if (n.terminal) out.emplace_back(id, prefix);
  for (int child : n.children) dfs_terminals(tree, child, prefix, out);
  prefix.resize(prefix.size() - n.chunk.size());
}

}  // namespace

std::vector<std::pair<int, TokenSequence>> collect_terminals(const SearchTree& tree) {
  std::vector<std::pair<int, TokenSequence>> out;
  TokenSequence prefix;
  dfs_terminals(tree, tree.root_id(), prefix, out);
  return out;
}

std::vector<int> penultimate_nodes(const SearchTree& tree) {
  std::vector<int> out;
  std::vector<char> seen(static_cast<std::size_t>(tree.size()), 0);
  for (const auto& [terminal_id, seq] : collect_terminals(tree)) {
    int parent = tree.node(terminal_id).parent;
    if (parent < 0) continue;  // the root cannot be terminal
    if (!seen[static_cast<std::size_t>(parent)]) {
      seen[static_cast<std::size_t>(parent)] = 1;
      out.push_back(parent);
    }
  }
  return out;
}

DecisionResult decide(const SearchTree& tree, const WeakPair& pair, int top_m) {
  if (top_m < 1) throw ArgumentError("top_m must be positive");
  if (tree.node(tree.root_id()).children.empty())
    throw EmptyTreeError("decide: tree has no children under the root");

  auto terminals = collect_terminals(tree);
  DecisionResult result;

  if (terminals.empty()) {
    // Fallback: the best live prefix, as-is. Terminal nodes carry the -inf
    // sentinel and the root is excluded.
    int best = -1;
    double best_return = kNegInf;
    for (int i = 1; i < tree.size(); ++i) {
      const SearchNode& n = tree.node(i);
      if (n.terminal || std::isinf(n.best_return)) continue;
      if (best == -1 || n.best_return > best_return) {
        best = i;
        best_return = n.best_return;
      }
    }
    if (best == -1) throw EmptyTreeError("decide: no terminal and no live node to fall back to");
    result.best = tree.continuation_of(best);
    result.best_node = best;
    result.used_fallback = true;
    return result;
  }

  // Top-M penultimate nodes by backed-up return, ties by ascending id.
  std::vector<int> pen = penultimate_nodes(tree);
  std::stable_sort(pen.begin(), pen.end(), [&](int a, int b) {
    double ra = tree.node(a).best_return;
    double rb = tree.node(b).best_return;
    if (ra != rb) return ra > rb;
    return a < b;
  });
  if (static_cast<int>(pen.size()) > top_m) pen.resize(static_cast<std::size_t>(top_m));

  for (int pen_id : pen) {
    for (int child_id : tree.node(pen_id).children) {
      const SearchNode& child = tree.node(child_id);
      if (!child.terminal) continue;  // global score is defined on complete sequences only
      Candidate cand;
      cand.sequence = tree.continuation_of(child_id);
      cand.terminal_node = child_id;
      cand.penultimate_node = pen_id;
      cand.penultimate_return = tree.node(pen_id).best_return;
      cand.global = global_score(pair, tree.prompt(), cand.sequence);
      result.candidates.push_back(std::move(cand));
    }
  }

  const Candidate* best = nullptr;
  for (const Candidate& cand : result.candidates) {
    if (!best || cand.global > best->global ||
        (cand.global == best->global && cand.terminal_node < best->terminal_node))
      best = &cand;
  }
  result.best = best->sequence;
  result.best_node = best->terminal_node;
  result.used_fallback = false;
  return result;
}

std::string decision_report(const DecisionResult& result, const Vocabulary& vocab) {
  nlohmann::json doc;
  doc["best"] = render(vocab, result.best);
  doc["best_node"] = result.best_node;
  doc["used_fallback"] = result.used_fallback;
  doc["candidates"] = nlohmann::json::array();
  for (const Candidate& cand : result.candidates) {
    nlohmann::json rec;
    rec["sequence"] = render(vocab, cand.sequence);
    rec["terminal_node"] = cand.terminal_node;
    rec["penultimate_node"] = cand.penultimate_node;
    rec["mcts_return"] = std::isinf(cand.penultimate_return)
                             ? nlohmann::json("-inf")
                             : nlohmann::json(cand.penultimate_return);
    rec["global_score"] = cand.global;
    doc["candidates"].push_back(std::move(rec));
  }
  return doc.dump(2);
}

}  // namespace aligntree
