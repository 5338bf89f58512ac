#include "aligntree/harness.hpp"

#include "aligntree/tabular.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace aligntree {

Method method_from_string(const std::string& name) {
  if (name == "w2s") return Method::W2s;
  if (name == "bon") return Method::Bon;
  if (name == "cbs") return Method::Cbs;
  if (name == "base") return Method::Base;
  if (name == "oracle") return Method::Oracle;
  throw ConfigError("unknown method '" + name + "' (expected w2s|bon|cbs|base|oracle)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::W2s: return "w2s";
    case Method::Bon: return "bon";
    case Method::Cbs: return "cbs";
    case Method::Base: return "base";
    case Method::Oracle: return "oracle";
  }
  throw ConfigError("bad method enum");
}

// ============================================================================
// RunConfig
// ============================================================================

nlohmann::json RunConfig::to_json() const {
  nlohmann::json doc;
  doc["method"] = method_name(method);
  doc["strong"] = strong_spec;
  doc["weak"] = {{"aligned", aligned_spec}, {"reference", reference_spec}};
  doc["search"] = {{"iterations", search.iterations},   {"expand_width", search.expand_width},
                   {"pool_size", search.pool_size},     {"chunk_length", search.chunk_length},
                   {"exploration", search.exploration}, {"entropy_weight", search.entropy_weight},
                   {"rerank_top", search.rerank_top}};
  doc["bon"] = {{"n", bon.n}};
  doc["cbs"] = {{"beam_width", cbs.beam_width},
                {"successors", cbs.successors},
                {"chunk_length", cbs.chunk_length}};
  doc["sampling"] = {{"temperature", sampling.temperature},
                     {"top_k", sampling.top_k},
                     {"top_p", sampling.top_p}};
  doc["max_new_tokens"] = max_new_tokens;
  doc["prompts"] = prompts_path.string();
  doc["template"] = template_name;
  doc["out"] = out_path.string();
  doc["seed"] = seed;
  if (gold_spec) doc["gold"] = *gold_spec;
  doc["oracle_budget"] = oracle_budget;
  return doc;
}

namespace {

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc) {
  RunConfig cfg;
  try {
    if (doc.contains("method")) cfg.method = method_from_string(doc.at("method").get<std::string>());
    if (doc.contains("strong")) cfg.strong_spec = doc.at("strong");
    if (doc.contains("weak")) {
      cfg.aligned_spec = doc.at("weak").at("aligned");
      cfg.reference_spec = doc.at("weak").at("reference");
    }
    if (doc.contains("search")) {
      const auto& s = doc.at("search");
      read_field(s, "iterations", cfg.search.iterations);
      read_field(s, "expand_width", cfg.search.expand_width);
      read_field(s, "pool_size", cfg.search.pool_size);
      read_field(s, "chunk_length", cfg.search.chunk_length);
      read_field(s, "exploration", cfg.search.exploration);
      read_field(s, "entropy_weight", cfg.search.entropy_weight);
      read_field(s, "rerank_top", cfg.search.rerank_top);
    }
    if (doc.contains("bon")) read_field(doc.at("bon"), "n", cfg.bon.n);
    if (doc.contains("cbs")) {
      const auto& c = doc.at("cbs");
      read_field(c, "beam_width", cfg.cbs.beam_width);
      read_field(c, "successors", cfg.cbs.successors);
      read_field(c, "chunk_length", cfg.cbs.chunk_length);
    }
    if (doc.contains("sampling")) {
      const auto& s = doc.at("sampling");
      read_field(s, "temperature", cfg.sampling.temperature);
      read_field(s, "top_k", cfg.sampling.top_k);
      read_field(s, "top_p", cfg.sampling.top_p);
    }
    read_field(doc, "max_new_tokens", cfg.max_new_tokens);
    if (doc.contains("prompts")) cfg.prompts_path = doc.at("prompts").get<std::string>();
    if (doc.contains("out")) cfg.out_path = doc.at("out").get<std::string>();
    read_field(doc, "template", cfg.template_name);
    read_field(doc, "seed", cfg.seed);
    if (doc.contains("gold")) cfg.gold_spec = doc.at("gold");
    read_field(doc, "oracle_budget", cfg.oracle_budget);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

std::string config_hash(const RunConfig& cfg) {
  nlohmann::json doc = cfg.to_json();
  doc.erase("out");
  doc.erase("seed");
  std::ostringstream hex;
  hex << std::hex << fnv1a64(doc.dump());
  return hex.str();
}

// ============================================================================
// Provider resolution
// ============================================================================

namespace {

struct GatewayContext {
  std::shared_ptr<RemoteVocabulary> registry;
  std::string eos_label;
  std::map<std::string, std::shared_ptr<QueryCache>> caches;
};

struct ResolvedProvider {
  ProviderPtr provider;
  bool tabular = false;
};

ResolvedProvider resolve_spec(const nlohmann::json& spec, GatewayContext& gw) {
  if (spec.is_null()) throw ConfigError("missing model spec");
  if (spec.contains("tabular")) {
    auto model = std::make_shared<TabularLM>(
        load_tabular_model(spec.at("tabular").get<std::string>()));
    return {model, true};
  }
  if (spec.contains("endpoint")) {
    const auto& ep = spec.at("endpoint");
    EndpointConfig cfg;
    cfg.base_url = ep.at("base_url").get<std::string>();
    cfg.model_name = ep.at("model_name").get<std::string>();
    read_field(ep, "timeout_seconds", cfg.timeout_seconds);
    read_field(ep, "max_retries", cfg.max_retries);
    read_field(ep, "logprob_top_k", cfg.logprob_top_k);
    read_field(ep, "eos_label", cfg.eos_label);
    read_field(ep, "echo_scoring", cfg.echo_scoring);
    cfg.api_key = api_key_from_env();

    if (!gw.registry) {
      gw.registry = std::make_shared<RemoteVocabulary>(cfg.eos_label);
      gw.eos_label = cfg.eos_label;
    } else if (gw.eos_label != cfg.eos_label) {
      throw ConfigError("endpoints disagree on the EOS token ('" + gw.eos_label + "' vs '" +
                        cfg.eos_label + "'); same-tokenizer model pairs are required");
    }
    std::string cache_path = ep.value("cache", std::string{});
    auto& cache = gw.caches[cache_path];
    if (!cache) cache = std::make_shared<QueryCache>(cache_path);
    return {std::make_shared<RemoteProvider>(std::move(cfg), cache, gw.registry), false};
  }
  throw ConfigError("model spec needs 'tabular' or 'endpoint'");
}

}  // namespace

ResolvedRun resolve_providers(const RunConfig& cfg) {
  GatewayContext gw;
  ResolvedRun run;

  auto strong = resolve_spec(cfg.strong_spec, gw);
  auto aligned = resolve_spec(cfg.aligned_spec, gw);
  auto reference = resolve_spec(cfg.reference_spec, gw);
  run.strong = strong.provider;
  run.pair.emplace(aligned.provider, reference.provider);
  run.all_tabular = strong.tabular && aligned.tabular && reference.tabular;

  if (!(run.strong->vocab() == run.pair->aligned->vocab()))
    throw ConfigError("strong model and weak pair must share one vocabulary");

  if (cfg.gold_spec) {
    auto positive = resolve_spec(cfg.gold_spec->at("positive"), gw);
    auto negative = resolve_spec(cfg.gold_spec->at("negative"), gw);
    double log_prior_ratio = cfg.gold_spec->value("log_prior_ratio", 0.0);
    if (!(positive.provider->vocab() == run.strong->vocab()))
      throw ConfigError("gold scorer must share the run vocabulary");
    run.gold = std::make_shared<ClassifierGoldScorer>(positive.provider, negative.provider,
                                                      log_prior_ratio);
  }
  run.registry = gw.registry;
  return run;
}

// ============================================================================
// Prompts
// ============================================================================

std::vector<PromptCase> load_prompts(const std::filesystem::path& path,
                                     const std::string& template_name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompts file " + path.string());
  std::vector<PromptCase> prompts;
  std::string line;
  std::int64_t line_index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("prompts line " + std::to_string(line_index + 1) + ": " + e.what());
    }
    PromptCase pc;
    pc.id = doc.value("id", line_index);
    for (const auto& [key, value] : doc.items()) {
      if (key == "id") continue;
      if (!value.is_string())
        throw ConfigError("prompt field '" + key + "' must be a string");
      pc.fields[key] = value.get<std::string>();
    }
    pc.text = apply_template(template_name, pc.fields);
    prompts.push_back(std::move(pc));
    ++line_index;
  }
  return prompts;
}

// ============================================================================
// RunRecord
// ============================================================================

namespace {

nlohmann::json score_to_json(double score) {
  if (std::isinf(score)) return score < 0 ? "-inf" : "inf";
  return score;
}

double score_from_json(const nlohmann::json& value) {
  if (value.is_string()) {
    if (value == "-inf") return kNegInf;
    if (value == "inf") return -kNegInf;
    throw ConfigError("bad score value in record");
  }
  return value.get<double>();
}

}  // namespace

nlohmann::json RunRecord::to_json() const {
  nlohmann::json doc;
  doc["prompt_id"] = prompt_id;
  doc["method"] = method;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  doc["wall_time_ms"] = wall_time_ms;
  if (error) {
    doc["error"] = *error;
    return doc;
  }
  doc["output_ids"] = output;
  doc["output"] = output_text;
  doc["global_score"] = score_to_json(global);
  if (gold) doc["gold_score"] = score_to_json(*gold);
  doc["used_fallback"] = used_fallback;
  if (tree_nodes) {
    doc["tree"] = {{"nodes", *tree_nodes}, {"terminals", *tree_terminals},
                   {"max_depth", *tree_depth}};
  }
  return doc;
}

RunRecord RunRecord::from_json(const nlohmann::json& doc) {
  RunRecord rec;
  rec.prompt_id = doc.at("prompt_id").get<std::int64_t>();
  rec.method = doc.at("method").get<std::string>();
  rec.seed = doc.at("seed").get<std::uint64_t>();
  rec.config_hash = doc.value("config_hash", std::string{});
  rec.wall_time_ms = doc.value("wall_time_ms", 0.0);
  if (doc.contains("error")) {
    rec.error = doc.at("error").get<std::string>();
    return rec;
  }
  rec.output = doc.at("output_ids").get<TokenSequence>();
  rec.output_text = doc.at("output").get<std::string>();
  rec.global = score_from_json(doc.at("global_score"));
  if (doc.contains("gold_score")) rec.gold = score_from_json(doc.at("gold_score"));
  rec.used_fallback = doc.value("used_fallback", false);
  if (doc.contains("tree")) {
    rec.tree_nodes = doc.at("tree").at("nodes").get<int>();
    rec.tree_terminals = doc.at("tree").at("terminals").get<int>();
    rec.tree_depth = doc.at("tree").at("max_depth").get<int>();
  }
  return rec;
}

void write_records(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write output file " + tmp.string());
    for (const RunRecord& rec : records) out << rec.to_json().dump() << "\n";
  }
  std::filesystem::rename(tmp, path);
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file " + path.string());
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(RunRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad record in " + path.string() + ": " + e.what());
    }
  }
  return records;
}

// ============================================================================
// run_method / run_oracle
// ============================================================================

namespace {

TokenSequence tokenize_prompt(const ResolvedRun& run, const PromptCase& pc) {
  if (run.registry) {
    if (pc.text.empty()) return {};
    return {run.registry->register_prompt(pc.text)};
  }
  return parse_labels(run.strong->vocab(), pc.text);
}

std::string output_text_of(const ResolvedRun& run, const TokenSequence& seq) {
  const Vocabulary& vocab = run.strong->vocab();
  if (!run.registry) return render(vocab, seq);
  std::string out;
  for (TokenId id : seq) out += vocab.label(id);
  return out;
}

}  // namespace

std::vector<RunRecord> run_method(const RunConfig& cfg) {
  if (cfg.method == Method::Oracle) return run_oracle(cfg);
  ResolvedRun run = resolve_providers(cfg);
  std::vector<PromptCase> prompts = load_prompts(cfg.prompts_path, cfg.template_name);
  std::string hash = config_hash(cfg);

  std::vector<RunRecord> records;
  records.reserve(prompts.size());
  for (const PromptCase& pc : prompts) {
    RunRecord rec;
    rec.prompt_id = pc.id;
    rec.method = method_name(cfg.method);
    rec.seed = cfg.seed;
    rec.config_hash = hash;
    auto start = std::chrono::steady_clock::now();
    try {
      TokenSequence prompt = tokenize_prompt(run, pc);
      std::uint64_t prompt_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(pc.id));
      TokenSequence output;
      switch (cfg.method) {
        case Method::W2s: {
          SearchConfig sc = cfg.search;
          sc.sampling = cfg.sampling;
          sc.max_new_tokens = cfg.max_new_tokens;
          sc.seed = prompt_seed;
          SearchTree tree = run_search(prompt, *run.strong, *run.pair, sc);
          DecisionResult dr = decide(tree, *run.pair, sc.rerank_top);
          output = dr.best;
          rec.used_fallback = dr.used_fallback;
          rec.tree_nodes = tree.size();
          rec.tree_terminals = tree.terminal_count();
          rec.tree_depth = tree.max_depth();
          break;
        }
        case Method::Bon: {
          BonConfig bc = cfg.bon;
          bc.sampling = cfg.sampling;
          bc.seed = prompt_seed;
          output = best_of_n(*run.strong, *run.pair, prompt, bc, cfg.max_new_tokens);
          break;
        }
        case Method::Cbs: {
          CbsConfig cc = cfg.cbs;
          cc.sampling = cfg.sampling;
          cc.seed = prompt_seed;
          output = cbs_generate(*run.strong, *run.pair, prompt, cc, cfg.max_new_tokens);
          break;
        }
        case Method::Base: {
          Rng rng(prompt_seed);
          output = base_generate(*run.strong, prompt, cfg.sampling, cfg.max_new_tokens, rng);
          break;
        }
        case Method::Oracle:
          break;  // handled above
      }
      rec.output = output;
      rec.output_text = output_text_of(run, output);
      rec.global = global_score(*run.pair, prompt, output);
      if (run.gold) rec.gold = run.gold->score(prompt, output);
    } catch (const Error& e) {
      rec.error = e.what();
    }
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

// Number of complete sequences over a vocabulary of `vocab_size` tokens
// (one of them EOS) with continuation cap `cap`:
//   sum_{k=1..cap} (V-1)^(k-1)  EOS-terminated, plus (V-1)^cap cap-terminated.
// Saturates well below uint64 overflow.
std::uint64_t oracle_sequence_count(int vocab_size, int cap) {
  const std::uint64_t kSaturate = std::numeric_limits<std::uint64_t>::max() / 4;
  std::uint64_t total = 0;
  std::uint64_t pow = 1;  // (V-1)^(k-1)
  std::uint64_t base = static_cast<std::uint64_t>(vocab_size - 1);
  for (int k = 1; k <= cap; ++k) {
    total = std::min(total + pow, kSaturate);
    pow = (base != 0 && pow > kSaturate / base) ? kSaturate : pow * base;
  }
  return std::min(total + pow, kSaturate);
}

}  // namespace

std::vector<RunRecord> run_oracle(const RunConfig& cfg) {
  ResolvedRun run = resolve_providers(cfg);
  if (!run.all_tabular)
    throw ConfigError("oracle requires tabular strong and weak models");
  std::vector<PromptCase> prompts = load_prompts(cfg.prompts_path, cfg.template_name);
  std::string hash = config_hash(cfg);

  const Vocabulary& vocab = run.strong->vocab();
  std::uint64_t needed = oracle_sequence_count(vocab.size(), cfg.max_new_tokens);
  if (needed > cfg.oracle_budget)
    throw BudgetError("oracle needs a budget of " + std::to_string(needed) +
                      " sequences; configured " + std::to_string(cfg.oracle_budget));

  std::vector<RunRecord> records;
  for (const PromptCase& pc : prompts) {
    RunRecord rec;
    rec.prompt_id = pc.id;
    rec.method = "oracle";
    rec.seed = cfg.seed;
    rec.config_hash = hash;
    auto start = std::chrono::steady_clock::now();
    try {
      TokenSequence prompt = tokenize_prompt(run, pc);
      TokenSequence best;
      double best_score = kNegInf;
      bool have_best = false;

      // Depth-first over ascending token ids: emission order is lexicographic,
      // so keeping the first strict maximum breaks ties toward the smallest
      // sequence.
      TokenSequence cont;
      auto visit = [&](auto&& self) -> void {
        for (TokenId t = 0; t < vocab.size(); ++t) {
          cont.push_back(t);
          bool complete = t == vocab.eos() || static_cast<int>(cont.size()) >= cfg.max_new_tokens;
          if (complete) {
            double score = global_score(*run.pair, prompt, cont);
            if (!have_best || score > best_score) {
              best = cont;
              best_score = score;
              have_best = true;
            }
          } else {
            self(self);
          }
          cont.pop_back();
        }
      };
      visit(visit);

      rec.output = best;
      rec.output_text = output_text_of(run, best);
      rec.global = best_score;
      if (run.gold) rec.gold = run.gold->score(prompt, best);
    } catch (const Error& e) {
      rec.error = e.what();
    }
    rec.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RunRecord> run(const RunConfig& cfg) {
  return cfg.method == Method::Oracle ? run_oracle(cfg) : run_method(cfg);
}

// ============================================================================
// compare_report
// ============================================================================

namespace {

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace

CompareReport compare_report(const std::vector<std::vector<RunRecord>>& record_sets) {
  std::map<std::string, std::vector<const RunRecord*>> by_method;
  for (const auto& set : record_sets)
    for (const RunRecord& rec : set) {
      if (rec.error)
        throw ArgumentError("cannot compare records that contain errors (prompt " +
                            std::to_string(rec.prompt_id) + ")");
      by_method[rec.method].push_back(&rec);
    }
  if (by_method.size() < 2) throw ArgumentError("compare needs records from at least 2 methods");

  // Identical prompt-id sets across methods.
  std::set<std::int64_t> reference_ids;
  bool first = true;
  for (const auto& [method, recs] : by_method) {
    std::set<std::int64_t> ids;
    for (const RunRecord* rec : recs) ids.insert(rec->prompt_id);
    if (first) {
      reference_ids = std::move(ids);
      first = false;
    } else if (ids != reference_ids) {
      throw ArgumentError("method '" + method + "' covers a different prompt set");
    }
  }

  nlohmann::json summary;
  summary["prompts"] = reference_ids.size();
  bool all_have_gold = true;
  for (const auto& [method, recs] : by_method)
    for (const RunRecord* rec : recs) all_have_gold = all_have_gold && rec->gold.has_value();

  std::ostringstream text;
  text << "method        n      global(mean+-std)";
  if (all_have_gold) text << "        gold(mean+-std)";
  text << "\n";

  // Per-prompt mean score for win-rate pairing (gold when complete, else global).
  std::map<std::string, std::map<std::int64_t, std::pair<double, int>>> per_prompt;

  for (const auto& [method, recs] : by_method) {
    std::vector<double> global_values, gold_values;
    for (const RunRecord* rec : recs) {
      global_values.push_back(rec->global);
      if (rec->gold) gold_values.push_back(*rec->gold);
      double score = all_have_gold ? *rec->gold : rec->global;
      auto& acc = per_prompt[method][rec->prompt_id];
      acc.first += score;
      acc.second += 1;
    }
    Stats g = stats_of(global_values);
    summary["methods"][method] = {{"count", recs.size()},
                                  {"global_mean", g.mean},
                                  {"global_std", g.stddev}};
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-12s %4zu   %10.4f +- %.4f", method.c_str(), recs.size(),
                  g.mean, g.stddev);
    text << buf;
    if (all_have_gold) {
      Stats gd = stats_of(gold_values);
      summary["methods"][method]["gold_mean"] = gd.mean;
      summary["methods"][method]["gold_std"] = gd.stddev;
      std::snprintf(buf, sizeof(buf), "   %10.4f +- %.4f", gd.mean, gd.stddev);
      text << buf;
    }
    text << "\n";
  }

  text << "\nwin rates (" << (all_have_gold ? "gold" : "global") << " score, ties count 0.5):\n";
  for (const auto& [method_a, prompts_a] : per_prompt) {
    for (const auto& [method_b, prompts_b] : per_prompt) {
      if (method_a >= method_b) continue;
      double wins = 0.0;
      for (std::int64_t id : reference_ids) {
        const auto& a = prompts_a.at(id);
        const auto& b = prompts_b.at(id);
        double score_a = a.first / a.second;
        double score_b = b.first / b.second;
        if (score_a > score_b)
          wins += 1.0;
        else if (score_a == score_b)
          wins += 0.5;
      }
      double rate = wins / static_cast<double>(reference_ids.size());
      summary["win_rates"][method_a + ">" + method_b] = rate;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "  %s > %s: %.3f\n", method_a.c_str(), method_b.c_str(),
                    rate);
      text << buf;
    }
  }

  return CompareReport{std::move(summary), text.str()};
}

}  // namespace aligntree
