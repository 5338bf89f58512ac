#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "aligntree/baselines.hpp"
#include "aligntree/decision.hpp"
#include "aligntree/gateway.hpp"
#include "aligntree/gold.hpp"
#include "aligntree/search.hpp"
#include "aligntree/templates.hpp"

namespace aligntree {

enum class Method { W2s, Bon, Cbs, Base, Oracle };

Method method_from_string(const std::string& name);
std::string method_name(Method method);

/// Full run configuration. Loaded from a JSON document whose sections mirror
/// these fields; every hyperparameter can be overridden from the CLI.
struct RunConfig {
  Method method = Method::W2s;
  nlohmann::json strong_spec;     ///< {"tabular": path} or {"endpoint": {...}}
  nlohmann::json aligned_spec;    ///< weak pair, same spec forms
  nlohmann::json reference_spec;
  SearchConfig search;
  BonConfig bon;
  CbsConfig cbs;
  SamplingParams sampling;
  int max_new_tokens = 50;
  std::filesystem::path prompts_path;
  std::string template_name = "none";
  std::filesystem::path out_path;
  std::uint64_t seed = 0;
  std::optional<nlohmann::json> gold_spec;  ///< {"positive": path, "negative": path, ...}
  std::uint64_t oracle_budget = 1'000'000;

  /// Canonical JSON of the resolved configuration (used for hashing).
  nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Hex FNV-1a of the canonical config, out path and seed excluded.
std::string config_hash(const RunConfig& cfg);

/// Providers, scorer, and prompt set resolved from a RunConfig.
struct ResolvedRun {
  ProviderPtr strong;
  std::optional<WeakPair> pair;
  std::shared_ptr<const GoldScorer> gold;
  bool all_tabular = false;
  /// Gateway plumbing, present when any endpoint spec was used.
  std::shared_ptr<RemoteVocabulary> registry;
};

ResolvedRun resolve_providers(const RunConfig& cfg);

struct PromptCase {
  std::int64_t id = 0;
  TemplateFields fields;
  std::string text;  ///< templated text
};

/// JSON-lines prompt file: one object per line, optional "id" (defaults to
/// the line index), remaining string fields feed the template.
std::vector<PromptCase> load_prompts(const std::filesystem::path& path,
                                     const std::string& template_name);

/// One decoding result. Everything but wall_time_ms is a pure function of
/// (config, seed, inputs).
struct RunRecord {
  std::int64_t prompt_id = 0;
  std::string method;
  TokenSequence output;
  std::string output_text;
  double global = kNegInf;
  std::optional<double> gold;
  bool used_fallback = false;
  std::optional<int> tree_nodes, tree_terminals, tree_depth;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::optional<std::string> error;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& doc);
};

/// Runs the configured method over every prompt. Per-prompt provider errors
/// are captured in the record; configuration errors throw before any run.
std::vector<RunRecord> run_method(const RunConfig& cfg);

/// Brute-force referee: enumerates every complete sequence up to the cap
/// (tabular providers only, within the budget) and returns the per-prompt
/// global-score argmax, ties by lexicographic token order.
std::vector<RunRecord> run_oracle(const RunConfig& cfg);

/// Runs the method selected by cfg.method (oracle included).
std::vector<RunRecord> run(const RunConfig& cfg);

/// JSON-lines record IO. Writing is atomic: complete file or no file.
void write_records(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

/// Aggregation across >= 2 record sets covering identical prompt ids:
/// per-method mean/std of global and gold scores, pairwise win rates.
struct CompareReport {
  nlohmann::json summary;
  std::string text;
};

CompareReport compare_report(const std::vector<std::vector<RunRecord>>& record_sets);

}  // namespace aligntree
