#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aligntree/proxy.hpp"

namespace aligntree {

/// Raised by select() when every path from the root is terminal or exhausted.
/// run_search treats this as an early-stop signal, not a failure.
class TreeExhaustedError : public Error {
 public:
  using Error::Error;
};

/// Hyperparameters of one tree search.
struct SearchConfig {
  int iterations = 50;          ///< MCTS iterations (m)
  int expand_width = 4;         ///< chunks created per expansion (K)
  int pool_size = 50;           ///< candidate-token pool per expansion (Top-N)
  int chunk_length = 1;         ///< tokens per chunk (L)
  double exploration = 1.5;     ///< exploration coefficient (c)
  double entropy_weight = 0.5;  ///< entropy bonus weight (w)
  int rerank_top = 4;           ///< penultimate nodes re-ranked in stage 2 (M)
  int max_new_tokens = 50;      ///< continuation length cap, prompt excluded
  SamplingParams sampling;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1 || expand_width < 1 || pool_size < 1 || chunk_length < 1 ||
        rerank_top < 1 || max_new_tokens < 1)
      throw ArgumentError("search counts must be positive");
    if (expand_width > pool_size)
      throw ArgumentError("expand_width must not exceed pool_size");
    if (exploration < 0 || entropy_weight < 0)
      throw ArgumentError("exploration and entropy_weight must be non-negative");
    sampling.validate();
  }
};

/// One node of the generative search tree. The chunk is the token span this
/// node appends to its parent's prefix; the root chunk is empty.
struct SearchNode {
  int id = 0;
  int parent = -1;
  TokenSequence chunk;
  double best_return = kNegInf;     ///< backed-up max return R(s)
  double initial_return = kNegInf;  ///< R at creation (proxy value, or -inf for terminal)
  int visits = 0;                   ///< N(s)
  double prior = 1.0;               ///< P(s), geometric-mean chunk prior
  double state_entropy = 0.0;       ///< H(s), strong-model entropy at this node's end state
  bool terminal = false;            ///< chunk ends in EOS or hit the length cap
  bool exhausted = false;           ///< every child terminal or exhausted
  std::vector<int> children;        ///< creation order == ascending id
  int depth_tokens = 0;             ///< continuation length at this node

  /// Temperature-adjusted strong distribution at this node's end state.
  /// Filled once per node and reused as its expansion distribution.
  std::optional<LogProbVector> cached_dist;
};

class SearchTree {
 public:
  explicit SearchTree(TokenSequence prompt);

  int root_id() const { return 0; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const SearchNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  SearchNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const TokenSequence& prompt() const { return prompt_; }

  int iterations_done = 0;

  /// Creates a child under `parent` and returns its id. Used by expand();
  /// exposed so tests can assemble trees with controlled statistics.
  int add_child(int parent, TokenSequence chunk, double prior, double state_entropy, bool terminal);

  /// Concatenated chunks from the root to `id` (prompt excluded).
  TokenSequence continuation_of(int id) const;
  /// prompt ++ continuation_of(id)
  TokenSequence context_of(int id) const;

  int terminal_count() const;
  int max_depth() const;  ///< deepest node, in edges from the root

 private:
  TokenSequence prompt_;
  std::vector<SearchNode> nodes_;
};

/// Entropy-aware selection score:
///   R + c * P * sqrt(parent_visits) / (1 + N) * (1 + w * H).
double ea_puct_score(const SearchNode& node, int parent_visits, double c, double w);

/// Descends from the root, at each step taking the non-terminal non-exhausted
/// child with the highest selection score (ties by ascending node id), until a
/// node with no children is reached. Throws TreeExhaustedError when no live
/// path exists.
int select(const SearchTree& tree, const SearchConfig& cfg);

/// Expands a leaf: forms the Top-N candidate pool from the strong model's
/// temperature-adjusted distribution, samples up to K distinct first tokens
/// proportionally to the pool, grows each into a chunk of up to L tokens via
/// the filtered strong distribution, and creates + evaluates one child per
/// chunk. Returns the new node ids in creation order.
std::vector<int> expand(SearchTree& tree, int leaf, const ModelProvider& strong,
                        const WeakPair& pair, const SearchConfig& cfg, Rng& rng);

/// Sets a new node's return: the prefix proxy value for live nodes, the -inf
/// sentinel for terminal ones. Returns the stored value.
double evaluate(SearchTree& tree, int id, const WeakPair& pair);

/// Walks from the expanded leaf to the root: increments visits, re-takes the
/// max over child returns, and recomputes exhausted flags bottom-up.
void backpropagate(SearchTree& tree, int from);

/// Observer invoked after each completed iteration (used by invariant tests).
using SearchObserver = std::function<void(const SearchTree&, int iteration)>;

/// Stage 1: up to cfg.iterations rounds of select / expand / evaluate /
/// backpropagate, stopping early when the tree is exhausted. Deterministic
/// given cfg.seed.
SearchTree run_search(const TokenSequence& prompt, const ModelProvider& strong,
                      const WeakPair& pair, const SearchConfig& cfg,
                      const SearchObserver& observer = {});

/// Tree dump for the inspection command and tests: one record per node with
/// id, parent, chunk labels, R (the sentinel prints as "-inf"), N, P, H and
/// the terminal/exhausted flags.
std::string dump_tree(const SearchTree& tree, const Vocabulary& vocab);

}  // namespace aligntree
