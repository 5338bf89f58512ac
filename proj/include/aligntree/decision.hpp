#pragma once

#include "aligntree/search.hpp"

namespace aligntree {

/// Raised by decide() on a tree that was never expanded.
class EmptyTreeError : public Error {
 public:
  using Error::Error;
};

/// One complete sequence considered in stage 2.
struct Candidate {
  TokenSequence sequence;  ///< prompt excluded; ends in EOS or at the length cap
  int terminal_node = -1;
  int penultimate_node = -1;
  double penultimate_return = kNegInf;  ///< backed-up MCTS return of the parent
  AlignmentScore global = kNegInf;
};

struct DecisionResult {
  TokenSequence best;                     ///< chosen continuation (prompt excluded)
  bool used_fallback = false;             ///< true iff the tree had no terminal node
  std::vector<Candidate> candidates;      ///< every candidate that was re-ranked
  int best_node = -1;                     ///< terminal node (or fallback node) behind `best`
};

/// Depth-first preorder collection of every terminal node with its full
/// root-to-node sequence.
std::vector<std::pair<int, TokenSequence>> collect_terminals(const SearchTree& tree);

/// Deduplicated parents of terminal nodes, in depth-first discovery order.
std::vector<int> penultimate_nodes(const SearchTree& tree);

/// Stage 2: ranks penultimate nodes by backed-up return, re-ranks the
/// terminal children of the top M by global alignment score, and returns the
/// argmax (ties by ascending node id). With no terminal in the tree, falls
/// back to the prefix of the non-root node with the highest finite return.
DecisionResult decide(const SearchTree& tree, const WeakPair& pair, int top_m);

/// Structured report of every considered candidate with both its MCTS return
/// and its global score, plus the chosen output.
std::string decision_report(const DecisionResult& result, const Vocabulary& vocab);

}  // namespace aligntree
