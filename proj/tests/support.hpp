#pragma once

// Shared fixtures: random tabular worlds, the brute-force enumeration oracle,
// and a query-auditing provider wrapper. Everything here is independent of
// the search/decision code paths it is used to check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "aligntree/proxy.hpp"
#include "aligntree/tabular.hpp"

namespace testsupport {

using namespace aligntree;

inline std::filesystem::path test_data_dir() {
  const char* dir = std::getenv("ALIGNTREE_TEST_DATA");
  if (dir) return dir;
  return std::filesystem::path(__FILE__).parent_path() / "data";
}

/// Strictly positive random distribution (no zero rows, so every sequence is
/// reachable and every log-ratio is finite).
inline LogProbVector random_row(int vocab_size, Rng& rng) {
  Eigen::ArrayXd p(vocab_size);
  for (int i = 0; i < vocab_size; ++i) p[i] = 0.05 + rng.next_double();
  p /= p.sum();
  return logprobs_from_probs(p);
}

/// Enumerates every EOS-free context of length 0..order (contexts never
/// contain EOS: queries stop at termination).
inline std::vector<TokenSequence> all_contexts(const Vocabulary& vocab, int order) {
  std::vector<TokenSequence> out{TokenSequence{}};
  std::vector<TokenSequence> frontier{TokenSequence{}};
  for (int len = 1; len <= order; ++len) {
    std::vector<TokenSequence> next;
    for (const auto& ctx : frontier)
      for (TokenId t = 0; t < vocab.size(); ++t) {
        if (t == vocab.eos()) continue;
        TokenSequence extended = ctx;
        extended.push_back(t);
        out.push_back(extended);
        next.push_back(std::move(extended));
      }
    frontier = std::move(next);
  }
  return out;
}

/// Random full-context model: one independent random row per context up to
/// `order` (order >= prompt length + cap - 1 makes it exact for that world).
inline std::shared_ptr<TabularLM> random_lm(const std::string& name, const Vocabulary& vocab,
                                            int order, Rng& rng) {
  TabularLM::RowMap rows;
  for (auto& ctx : all_contexts(vocab, order)) rows.emplace(std::move(ctx), random_row(vocab.size(), rng));
  return std::make_shared<TabularLM>(name, vocab, order, std::move(rows));
}

/// Model whose rows are random permutations of one fixed probability
/// multiset. Two such models share per-row power sums for every exponent, so
/// per-row power scaling is exactly sequence-level power scaling.
inline std::shared_ptr<TabularLM> permuted_row_lm(const std::string& name, const Vocabulary& vocab,
                                                  int order, const Eigen::ArrayXd& base_probs,
                                                  Rng& rng) {
  TabularLM::RowMap rows;
  for (auto& ctx : all_contexts(vocab, order)) {
    std::vector<int> perm(static_cast<std::size_t>(vocab.size()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    Eigen::ArrayXd p(vocab.size());
    for (int i = 0; i < vocab.size(); ++i) p[i] = base_probs[perm[static_cast<std::size_t>(i)]];
    rows.emplace(std::move(ctx), logprobs_from_probs(p));
  }
  return std::make_shared<TabularLM>(name, vocab, order, std::move(rows));
}

/// Every complete continuation: EOS-terminated sequences up to `cap` tokens
/// plus cap-length sequences, in lexicographic token-id order.
inline std::vector<TokenSequence> enumerate_complete(const Vocabulary& vocab, int cap) {
  std::vector<TokenSequence> out;
  TokenSequence cont;
  auto visit = [&](auto&& self) -> void {
    for (TokenId t = 0; t < vocab.size(); ++t) {
      cont.push_back(t);
      if (t == vocab.eos() || static_cast<int>(cont.size()) >= cap)
        out.push_back(cont);
      else
        self(self);
      cont.pop_back();
    }
  };
  visit(visit);
  return out;
}

/// Forwarding provider that counts queries. The EOS-context contract is
/// enforced by the ModelProvider wrapper itself; this re-checks it so a
/// violation in the engine fails loudly inside tests.
class AuditingProvider : public ModelProvider {
 public:
  explicit AuditingProvider(ProviderPtr inner) : inner_(std::move(inner)) {}

  const std::string& name() const override { return inner_->name(); }
  const Vocabulary& vocab() const override { return inner_->vocab(); }
  long queries() const { return queries_.load(); }
  long eos_violations() const { return eos_violations_.load(); }

 protected:
  LogProbVector next_logprobs_impl(const TokenSequence& context) const override {
    queries_.fetch_add(1);
    if (contains_eos(vocab(), context)) eos_violations_.fetch_add(1);
    return inner_->next_token_logprobs(context);
  }

 private:
  ProviderPtr inner_;
  mutable std::atomic<long> queries_{0};
  mutable std::atomic<long> eos_violations_{0};
};

/// Tiny named world shared by several suites: vocabulary {A, B, <eos>}.
inline Vocabulary abe_vocab() { return Vocabulary({"A", "B", "<eos>"}, 2); }

}  // namespace testsupport

#include "aligntree/search.hpp"

namespace testsupport {

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define TS_REQUIRE(cond, msg)                                          \
  do {                                                                 \
    if (!(cond)) throw InvariantViolation(std::string("tree invariant: ") + (msg)); \
  } while (0)

/// Structural + statistical invariants that must hold after every search
/// iteration. Throws InvariantViolation with a description on failure.
inline void check_tree_invariants(const SearchTree& tree, const SearchConfig& cfg,
                                  const Vocabulary& vocab) {
  const double max_entropy = std::log(static_cast<double>(vocab.size())) + 1e-12;
  for (int id = 0; id < tree.size(); ++id) {
    const SearchNode& n = tree.node(id);
    TS_REQUIRE(n.id == id, "dense ids");
    if (id == 0) {
      TS_REQUIRE(n.parent == -1 && n.chunk.empty() && n.prior == 1.0, "root shape");
      TS_REQUIRE(n.visits == tree.iterations_done, "N(root) == iterations performed");
    } else {
      const SearchNode& parent = tree.node(n.parent);
      TS_REQUIRE(std::find(parent.children.begin(), parent.children.end(), id) !=
                     parent.children.end(),
                 "parent/child links consistent");
      TS_REQUIRE(n.parent < id, "parents precede children (acyclic)");
      TS_REQUIRE(!n.chunk.empty() && static_cast<int>(n.chunk.size()) <= cfg.chunk_length,
                 "chunk length in [1, L]");
      bool ends_eos = n.chunk.back() == vocab.eos();
      bool at_cap = n.depth_tokens >= cfg.max_new_tokens;
      if (static_cast<int>(n.chunk.size()) < cfg.chunk_length)
        TS_REQUIRE(ends_eos || at_cap, "short chunk only at EOS or the cap");
      TS_REQUIRE(n.terminal == (ends_eos || at_cap), "terminal iff EOS or cap");
      TS_REQUIRE(parent.visits >= n.visits, "N(parent) >= N(child)");
      TS_REQUIRE(n.prior > 0.0 && n.prior <= 1.0, "P in (0, 1]");
    }
    TS_REQUIRE(n.state_entropy >= 0.0 && n.state_entropy <= max_entropy, "H in [0, ln V]");
    TS_REQUIRE(n.depth_tokens <= cfg.max_new_tokens, "continuation within the cap");

    if (n.terminal) {
      TS_REQUIRE(std::isinf(n.best_return) && n.best_return < 0, "terminal R is the -inf sentinel");
      TS_REQUIRE(n.children.empty(), "terminal nodes have no children");
      TS_REQUIRE(n.visits == 0, "terminal nodes are never selected");
    }

    // Max-return backprop equality.
    double expect = n.initial_return;
    for (int child : n.children) expect = std::max(expect, tree.node(child).best_return);
    if (std::isinf(expect))
      TS_REQUIRE(std::isinf(n.best_return) && n.best_return < 0, "max-return equality (-inf)");
    else
      TS_REQUIRE(n.best_return == expect, "max-return equality");

    bool all_dead = !n.children.empty();
    for (int child : n.children)
      all_dead = all_dead && (tree.node(child).terminal || tree.node(child).exhausted);
    TS_REQUIRE(n.exhausted == all_dead, "exhausted iff children exist and are all dead");

    // EOS only as the final token of a terminal chunk.
    for (std::size_t i = 0; i < n.chunk.size(); ++i)
      if (n.chunk[i] == vocab.eos())
        TS_REQUIRE(i + 1 == n.chunk.size() && n.terminal, "EOS terminates its chunk");
  }
}

#undef TS_REQUIRE

}  // namespace testsupport

#include <fstream>

#include "aligntree/harness.hpp"

namespace testsupport {

/// On-disk world: tabular strong/weak/gold models, a JSONL prompt file, and a
/// RunConfig wired to them. Exercises the same file paths the CLI uses.
struct FileWorld {
  std::filesystem::path dir;
  Vocabulary vocab = abe_vocab();
  RunConfig config;
};

inline FileWorld make_file_world(const std::filesystem::path& dir, std::uint64_t seed,
                                 int n_prompts = 2, int cap = 4, int order = 10) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  FileWorld world;
  world.dir = dir;
  Rng rng(seed);

  auto write_model = [&](const std::string& name) {
    auto lm = random_lm(name, world.vocab, order, rng);
    save_tabular_model(*lm, dir / (name + ".json"));
    return nlohmann::json{{"tabular", (dir / (name + ".json")).string()}};
  };

  RunConfig cfg;
  cfg.method = Method::W2s;
  cfg.strong_spec = write_model("strong");
  cfg.aligned_spec = write_model("aligned");
  cfg.reference_spec = write_model("reference");
  cfg.gold_spec = nlohmann::json{{"positive", write_model("gold_pos")},
                                 {"negative", write_model("gold_neg")},
                                 {"log_prior_ratio", 0.0}};
  cfg.search.iterations = 24;
  cfg.search.expand_width = 2;
  cfg.search.pool_size = 3;
  cfg.search.chunk_length = 1;
  cfg.search.exploration = 1.0;
  cfg.search.entropy_weight = 0.5;
  cfg.search.rerank_top = 4;
  cfg.sampling = SamplingParams{0.7, 0, 1.0};
  cfg.max_new_tokens = cap;
  cfg.template_name = "none";
  cfg.prompts_path = dir / "prompts.jsonl";
  cfg.out_path = dir / "out.jsonl";
  cfg.seed = seed;

  {
    std::ofstream prompts(cfg.prompts_path);
    for (int i = 0; i < n_prompts; ++i) {
      std::string text = (i % 2 == 0) ? "A" : "B A";
      prompts << nlohmann::json{{"id", i}, {"prompt", text}}.dump() << "\n";
    }
  }
  world.config = std::move(cfg);
  return world;
}

/// Records with the volatile wall-time field stripped, re-serialized; used
/// for byte-level determinism comparisons.
inline std::string canonical_records(const std::vector<RunRecord>& records) {
  std::string out;
  for (const RunRecord& rec : records) {
    nlohmann::json doc = rec.to_json();
    doc.erase("wall_time_ms");
    out += doc.dump();
    out += "\n";
  }
  return out;
}

}  // namespace testsupport
