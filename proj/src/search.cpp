#include "aligntree/search.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace aligntree {

SearchTree::SearchTree(TokenSequence prompt) : prompt_(std::move(prompt)) {
  SearchNode root;
  root.id = 0;
  root.prior = 1.0;
  nodes_.push_back(std::move(root));
}

int SearchTree::add_child(int parent, TokenSequence chunk, double prior, double state_entropy,
                          bool terminal) {
  if (parent < 0 || parent >= size()) throw ArgumentError("add_child: bad parent id");
  if (chunk.empty()) throw ArgumentError("add_child: non-root chunk must not be empty");
  SearchNode child;
  child.id = size();
  child.parent = parent;
  child.depth_tokens = node(parent).depth_tokens + static_cast<int>(chunk.size());
  child.chunk = std::move(chunk);
  child.prior = prior;
  child.state_entropy = state_entropy;
  child.terminal = terminal;
  node(parent).children.push_back(child.id);
  nodes_.push_back(std::move(child));
  return size() - 1;
}

TokenSequence SearchTree::continuation_of(int id) const {
  std::vector<const TokenSequence*> chunks;
  for (int cur = id; cur != 0; cur = node(cur).parent) chunks.push_back(&node(cur).chunk);
  TokenSequence out;
  for (auto it = chunks.rbegin(); it != chunks.rend(); ++it)
    out.insert(out.end(), (*it)->begin(), (*it)->end());
  return out;
}

TokenSequence SearchTree::context_of(int id) const { return concat(prompt_, continuation_of(id)); }

int SearchTree::terminal_count() const {
  int n = 0;
  for (int i = 0; i < size(); ++i) n += node(i).terminal ? 1 : 0;
  return n;
}

int SearchTree::max_depth() const {
  int best = 0;
  for (int i = 0; i < size(); ++i) {
    int depth = 0;
    for (int cur = i; cur != 0; cur = node(cur).parent) ++depth;
    best = std::max(best, depth);
  }
  return best;
}

double ea_puct_score(const SearchNode& node, int parent_visits, double c, double w) {
  double explore = c * node.prior * (std::sqrt(static_cast<double>(parent_visits)) /
                                     (1.0 + static_cast<double>(node.visits)));
  return node.best_return + explore * (1.0 + w * node.state_entropy);
}

int select(const SearchTree& tree, const SearchConfig& cfg) {
  int cur = tree.root_id();
  while (true) {
    const SearchNode& n = tree.node(cur);
    if (n.children.empty()) return cur;
    int best = -1;
    double best_score = 0.0;
    for (int child_id : n.children) {
      const SearchNode& child = tree.node(child_id);
      if (child.terminal || child.exhausted) continue;
      double score = ea_puct_score(child, n.visits, cfg.exploration, cfg.entropy_weight);
      if (best == -1 || score > best_score) {
        best = child_id;
        best_score = score;
      }
    }
    if (best == -1)
      throw TreeExhaustedError("selection reached a node with no live children");
    cur = best;
  }
}

namespace {

// Temperature-adjusted strong distribution at the node's end state, computed
// once and cached on the node.
const LogProbVector& state_distribution(SearchTree& tree, int id, const ModelProvider& strong,
                                        const SearchConfig& cfg) {
  SearchNode& n = tree.node(id);
  if (!n.cached_dist) {
    n.cached_dist = apply_temperature(strong.next_token_logprobs(tree.context_of(id)),
                                      cfg.sampling.temperature);
    if (id == tree.root_id()) n.state_entropy = entropy(*n.cached_dist);
  }
  return *n.cached_dist;
}

}  // namespace

std::vector<int> expand(SearchTree& tree, int leaf, const ModelProvider& strong,
                        const WeakPair& pair, const SearchConfig& cfg, Rng& rng) {
  {
    const SearchNode& n = tree.node(leaf);
    if (n.terminal) throw ArgumentError("expand: leaf is terminal");
    if (!n.children.empty()) throw ArgumentError("expand: leaf already expanded");
    if (n.depth_tokens >= cfg.max_new_tokens)
      throw ArgumentError("expand: leaf already at the length cap");
  }

  const LogProbVector leaf_dist = state_distribution(tree, leaf, strong, cfg);
  const TokenSequence leaf_context = tree.context_of(leaf);
  const int leaf_depth = tree.node(leaf).depth_tokens;

  // Candidate pool: the Top-N most probable tokens (ties by ascending id).
  std::vector<int> order(static_cast<std::size_t>(leaf_dist.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return leaf_dist[a] > leaf_dist[b]; });
  LogProbVector pool = LogProbVector::Constant(leaf_dist.size(), kNegInf);
  int pool_count = std::min<int>(cfg.pool_size, static_cast<int>(order.size()));
  for (int i = 0; i < pool_count; ++i) pool[order[static_cast<std::size_t>(i)]] =
      leaf_dist[order[static_cast<std::size_t>(i)]];

  // K distinct first tokens, drawn proportionally without replacement.
  std::vector<TokenId> firsts = sample_distinct(pool, cfg.expand_width, rng);

  std::vector<int> created;
  const Vocabulary& vocab = strong.vocab();
  for (TokenId first : firsts) {
    TokenSequence chunk{first};
    std::vector<double> token_probs{std::exp(leaf_dist[first])};
    TokenSequence context = leaf_context;
    context.push_back(first);

    bool terminal = false;
    while (true) {
      if (chunk.back() == vocab.eos() || leaf_depth + static_cast<int>(chunk.size()) >=
                                             cfg.max_new_tokens) {
        terminal = true;
        break;
      }
      if (static_cast<int>(chunk.size()) >= cfg.chunk_length) break;
      LogProbVector step = apply_temperature(strong.next_token_logprobs(context),
                                             cfg.sampling.temperature);
      TokenId next = sample_token(truncate_top_k_top_p(step, cfg.sampling), rng);
      chunk.push_back(next);
      context.push_back(next);
      token_probs.push_back(std::exp(step[next]));
    }

    int child = tree.add_child(leaf, std::move(chunk), chunk_prior(token_probs),
                               /*state_entropy=*/0.0, terminal);
    if (!terminal) {
      SearchNode& c = tree.node(child);
      c.cached_dist = apply_temperature(strong.next_token_logprobs(context),
                                        cfg.sampling.temperature);
      c.state_entropy = entropy(*c.cached_dist);
    }
    evaluate(tree, child, pair);
    created.push_back(child);
  }
  return created;
}

double evaluate(SearchTree& tree, int id, const WeakPair& pair) {
  SearchNode& n = tree.node(id);
  if (n.terminal) {
    n.initial_return = kNegInf;
    n.best_return = kNegInf;
  } else {
    double value = v_proxy(pair, tree.prompt(), tree.continuation_of(id));
    n.initial_return = value;
    n.best_return = value;
  }
  return n.best_return;
}

void backpropagate(SearchTree& tree, int from) {
  for (int cur = from; cur != -1; cur = tree.node(cur).parent) {
    SearchNode& n = tree.node(cur);
    n.visits += 1;
    bool all_dead = !n.children.empty();
    for (int child_id : n.children) {
      const SearchNode& child = tree.node(child_id);
      n.best_return = std::max(n.best_return, child.best_return);
      all_dead = all_dead && (child.terminal || child.exhausted);
    }
    n.exhausted = all_dead;
  }
}

SearchTree run_search(const TokenSequence& prompt, const ModelProvider& strong,
                      const WeakPair& pair, const SearchConfig& cfg,
                      const SearchObserver& observer) {
  cfg.validate();
  validate_sequence(strong.vocab(), prompt);
  if (contains_eos(strong.vocab(), prompt)) throw ArgumentError("prompt must not contain EOS");
  if (!(strong.vocab() == pair.aligned->vocab()))
    throw ArgumentError("strong model and weak pair must share one vocabulary");

  Rng rng(cfg.seed);
  SearchTree tree(prompt);
  for (int i = 0; i < cfg.iterations; ++i) {
    if (tree.node(tree.root_id()).exhausted) break;
    int leaf = select(tree, cfg);
    expand(tree, leaf, strong, pair, cfg, rng);
    backpropagate(tree, leaf);
    tree.iterations_done += 1;
    if (observer) observer(tree, i);
  }
  return tree;
}

std::string dump_tree(const SearchTree& tree, const Vocabulary& vocab) {
  nlohmann::json doc;
  doc["prompt"] = render(vocab, tree.prompt());
  doc["iterations"] = tree.iterations_done;
  doc["nodes"] = nlohmann::json::array();
  for (int i = 0; i < tree.size(); ++i) {
    const SearchNode& n = tree.node(i);
    nlohmann::json rec;
    rec["id"] = n.id;
    if (n.parent >= 0)
      rec["parent"] = n.parent;
    else
      rec["parent"] = nullptr;
    nlohmann::json chunk = nlohmann::json::array();
    for (TokenId t : n.chunk) chunk.push_back(vocab.label(t));
    rec["chunk"] = std::move(chunk);
    if (std::isinf(n.best_return))
      rec["R"] = "-inf";
    else
      rec["R"] = n.best_return;
    rec["N"] = n.visits;
    rec["P"] = n.prior;
    rec["H"] = n.state_entropy;
    rec["terminal"] = n.terminal;
    rec["exhausted"] = n.exhausted;
    doc["nodes"].push_back(std::move(rec));
  }
  return doc.dump(2);
}

}  // namespace aligntree
