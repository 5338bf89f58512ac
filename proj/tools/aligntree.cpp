// aligntree: weak-pair guided tree-search decoding over tabular or remote
// models. Subcommands: run, compare, dump-tree, validate-config.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "aligntree/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunError = 1;
constexpr int kExitConfigError = 2;

struct Overrides {
  std::optional<std::string> method;
  std::optional<std::string> prompts;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations, expand_width, pool_size, chunk_length, rerank_top;
  std::optional<double> exploration, entropy_weight;
  std::optional<int> bon_n, beam_width, successors, cbs_chunk_length;
  std::optional<double> temperature, top_p;
  std::optional<int> top_k, max_new_tokens;
  std::optional<std::string> template_name;
  bool sweep_exploration = false;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--method", ov.method, "w2s|bon|cbs|base|oracle");
  cmd->add_option("--prompts", ov.prompts, "prompt JSONL path");
  cmd->add_option("--out", ov.out, "output records path");
  cmd->add_option("--seed", ov.seed, "run seed");
  cmd->add_option("--iterations", ov.iterations, "MCTS iterations (m)");
  cmd->add_option("--expand-width", ov.expand_width, "chunks per expansion (K)");
  cmd->add_option("--pool-size", ov.pool_size, "candidate token pool (Top-N)");
  cmd->add_option("--chunk-length", ov.chunk_length, "tokens per chunk (L)");
  cmd->add_option("--exploration", ov.exploration, "exploration coefficient (c)");
  cmd->add_option("--entropy-weight", ov.entropy_weight, "entropy bonus weight (w)");
  cmd->add_option("--rerank-top", ov.rerank_top, "penultimate nodes re-ranked (M)");
  cmd->add_option("--bon-n", ov.bon_n, "best-of-n sample count");
  cmd->add_option("--beam-width", ov.beam_width, "CBS beam width (W)");
  cmd->add_option("--successors", ov.successors, "CBS successors per beam (K)");
  cmd->add_option("--cbs-chunk-length", ov.cbs_chunk_length, "CBS chunk length (L)");
  cmd->add_option("--temperature", ov.temperature, "sampling temperature");
  cmd->add_option("--top-k", ov.top_k, "sampling top-k (0 = unlimited)");
  cmd->add_option("--top-p", ov.top_p, "sampling top-p");
  cmd->add_option("--max-new-tokens", ov.max_new_tokens, "continuation length cap");
  cmd->add_option("--template", ov.template_name, "prompt template name");
  cmd->add_flag("--sweep-exploration", ov.sweep_exploration,
                "run the exploration sweep {1.0, 1.5, 2.0} and report all three");
}

void apply_overrides(aligntree::RunConfig& cfg, const Overrides& ov) {
  if (ov.method) cfg.method = aligntree::method_from_string(*ov.method);
  if (ov.prompts) cfg.prompts_path = *ov.prompts;
  if (ov.out) cfg.out_path = *ov.out;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.iterations) cfg.search.iterations = *ov.iterations;
  if (ov.expand_width) cfg.search.expand_width = *ov.expand_width;
  if (ov.pool_size) cfg.search.pool_size = *ov.pool_size;
  if (ov.chunk_length) cfg.search.chunk_length = *ov.chunk_length;
  if (ov.exploration) cfg.search.exploration = *ov.exploration;
  if (ov.entropy_weight) cfg.search.entropy_weight = *ov.entropy_weight;
  if (ov.rerank_top) cfg.search.rerank_top = *ov.rerank_top;
  if (ov.bon_n) cfg.bon.n = *ov.bon_n;
  if (ov.beam_width) cfg.cbs.beam_width = *ov.beam_width;
  if (ov.successors) cfg.cbs.successors = *ov.successors;
  if (ov.cbs_chunk_length) cfg.cbs.chunk_length = *ov.cbs_chunk_length;
  if (ov.temperature) cfg.sampling.temperature = *ov.temperature;
  if (ov.top_k) cfg.sampling.top_k = *ov.top_k;
  if (ov.top_p) cfg.sampling.top_p = *ov.top_p;
  if (ov.max_new_tokens) cfg.max_new_tokens = *ov.max_new_tokens;
  if (ov.template_name) cfg.template_name = *ov.template_name;
}

int do_run(const std::string& config_path, const Overrides& ov) {
  aligntree::RunConfig cfg = aligntree::load_run_config(config_path);
  apply_overrides(cfg, ov);
  if (cfg.out_path.empty()) throw aligntree::ConfigError("no output path configured");

  std::vector<aligntree::RunRecord> records;
  if (ov.sweep_exploration && cfg.method == aligntree::Method::W2s) {
    for (double c : {1.0, 1.5, 2.0}) {
      aligntree::RunConfig swept = cfg;
      swept.search.exploration = c;
      auto batch = aligntree::run(swept);
      char label[32];
      std::snprintf(label, sizeof(label), "w2s[c=%.1f]", c);
      for (auto& rec : batch) rec.method = label;
      records.insert(records.end(), batch.begin(), batch.end());
    }
  } else {
    records = aligntree::run(cfg);
  }
  aligntree::write_records(records, cfg.out_path);

  int errors = 0;
  for (const auto& rec : records)
    if (rec.error) {
      ++errors;
      std::cerr << "prompt " << rec.prompt_id << ": " << *rec.error << "\n";
    }
  std::cout << "wrote " << records.size() << " records to " << cfg.out_path.string();
  if (errors) std::cout << " (" << errors << " with errors)";
  std::cout << "\n";
  return errors ? kExitRunError : kExitOk;
}

int do_compare(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<std::vector<aligntree::RunRecord>> sets;
  for (const auto& path : inputs) sets.push_back(aligntree::read_records(path));
  aligntree::CompareReport report = aligntree::compare_report(sets);
  std::cout << report.text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw aligntree::ConfigError("cannot write report to " + out);
    f << report.summary.dump(2) << "\n";
    std::cout << "wrote report to " << out << "\n";
  }
  return kExitOk;
}

int do_dump_tree(const std::string& config_path, std::int64_t prompt_id, const Overrides& ov) {
  aligntree::RunConfig cfg = aligntree::load_run_config(config_path);
  apply_overrides(cfg, ov);
  aligntree::ResolvedRun run = aligntree::resolve_providers(cfg);
  auto prompts = aligntree::load_prompts(cfg.prompts_path, cfg.template_name);
  for (const auto& pc : prompts) {
    if (pc.id != prompt_id) continue;
    aligntree::TokenSequence prompt =
        run.registry ? aligntree::TokenSequence{run.registry->register_prompt(pc.text)}
                     : aligntree::parse_labels(run.strong->vocab(), pc.text);
    aligntree::SearchConfig sc = cfg.search;
    sc.sampling = cfg.sampling;
    sc.max_new_tokens = cfg.max_new_tokens;
    sc.seed = aligntree::derive_seed(cfg.seed, static_cast<std::uint64_t>(pc.id));
    aligntree::SearchTree tree = aligntree::run_search(prompt, *run.strong, *run.pair, sc);
    std::cout << aligntree::dump_tree(tree, run.strong->vocab()) << "\n";
    aligntree::DecisionResult decision = aligntree::decide(tree, *run.pair, sc.rerank_top);
    std::cout << aligntree::decision_report(decision, run.strong->vocab()) << "\n";
    return kExitOk;
  }
  throw aligntree::ConfigError("prompt id " + std::to_string(prompt_id) + " not found in " +
                               cfg.prompts_path.string());
}

int do_validate(const std::string& config_path) {
  aligntree::RunConfig cfg = aligntree::load_run_config(config_path);
  aligntree::resolve_providers(cfg);
  aligntree::load_prompts(cfg.prompts_path, cfg.template_name);
  std::cout << "config ok: method=" << aligntree::method_name(cfg.method)
            << " hash=" << aligntree::config_hash(cfg) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weak-pair guided tree-search decoding"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::vector<std::string> compare_inputs;
  std::int64_t prompt_id = 0;
  Overrides ov;

  CLI::App* run_cmd = app.add_subcommand("run", "run a method over a prompt set");
  run_cmd->add_option("--config", config_path, "run config JSON")->required();
  add_override_flags(run_cmd, ov);

  CLI::App* compare_cmd = app.add_subcommand("compare", "aggregate records from >= 2 methods");
  compare_cmd->add_option("--inputs", compare_inputs, "record JSONL files")
      ->required()
      ->expected(-2);
  compare_cmd->add_option("--out", out_path, "write the JSON summary here");

  CLI::App* dump_cmd = app.add_subcommand("dump-tree", "run the search and dump its tree to stdout");
  dump_cmd->add_option("--config", config_path, "run config JSON")->required();
  dump_cmd->add_option("--prompt-id", prompt_id, "prompt to search")->required();
  add_override_flags(dump_cmd, ov);

  CLI::App* validate_cmd = app.add_subcommand("validate-config", "resolve and check a config");
  validate_cmd->add_option("--config", config_path, "run config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(config_path, ov);
    if (compare_cmd->parsed()) return do_compare(compare_inputs, out_path);
    if (dump_cmd->parsed()) return do_dump_tree(config_path, prompt_id, ov);
    if (validate_cmd->parsed()) return do_validate(config_path);
  } catch (const aligntree::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const aligntree::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunError;
  }
  return kExitOk;
}
