#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "aligntree/provider.hpp"

namespace aligntree {

/// OpenAI-compatible completions endpoint. The API key is read from the
/// ALIGNTREE_API_KEY environment variable, never from config files.
struct EndpointConfig {
  std::string base_url;  ///< absolute URL, e.g. http://localhost:8080
  std::string api_key;
  std::string model_name;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  int logprob_top_k = 20;  ///< server-side cap on returned alternatives
  std::string eos_label = "<|endoftext|>";
  bool echo_scoring = true;  ///< disable for servers without echo support

  void validate() const {
    if (base_url.find("://") == std::string::npos)
      throw ConfigError("base_url must be an absolute URL");
    if (model_name.empty()) throw ConfigError("model_name required");
    if (!(timeout_seconds > 0)) throw ConfigError("timeout must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be non-negative");
    if (logprob_top_k < 1) throw ConfigError("logprob_top_k must be positive");
  }
};

/// Reads ALIGNTREE_API_KEY, or returns "" when unset.
std::string api_key_from_env();

/// 64-bit FNV-1a, used to key cache records.
std::uint64_t fnv1a64(const std::string& data);

/// Persistent query cache: an append-only JSONL record log keyed by request
/// hash. Concurrent reads, serialized writes, and in-flight deduplication of
/// identical requests. An empty path keeps the cache memory-only.
class QueryCache {
 public:
  explicit QueryCache(std::filesystem::path path = {});

  /// Returns the cached fragment, or fetches it exactly once (concurrent
  /// identical requests wait for the first) and appends the record.
  nlohmann::json fetch_or_compute(const std::string& key, const nlohmann::json& meta,
                                  const std::function<nlohmann::json()>& fetch);

  std::optional<nlohmann::json> lookup(const std::string& key) const;
  std::size_t size() const;

 private:
  void append_record_locked(const std::string& key, const nlohmann::json& meta,
                            const nlohmann::json& fragment);

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, nlohmann::json> entries_;
  std::map<std::string, int> pending_;
};

/// Token registry shared by every remote provider of one run. Server-reported
/// token strings are registered on first sight; detokenization is plain label
/// concatenation. Registration is serialized; run one remote search at a time
/// (tabular providers remain the reference for concurrent use).
class RemoteVocabulary {
 public:
  explicit RemoteVocabulary(const std::string& eos_label);

  const Vocabulary& vocab() const { return vocab_; }
  TokenId token_for(const std::string& label);
  /// Registers an entire prompt text as a single atom token.
  TokenId register_prompt(const std::string& text) { return token_for(text); }

 private:
  std::mutex mu_;
  Vocabulary vocab_;
};

/// ModelProvider backed by a remote completions endpoint with caching.
///
/// The server returns only the top-k alternatives per position; the resulting
/// vectors renormalize over that support, which underestimates entropy.
/// Tabular providers are the exactness reference.
class RemoteProvider : public ModelProvider {
 public:
  RemoteProvider(EndpointConfig cfg, std::shared_ptr<QueryCache> cache,
                 std::shared_ptr<RemoteVocabulary> registry);

  const std::string& name() const override { return cfg_.model_name; }
  const Vocabulary& vocab() const override { return registry_->vocab(); }

  /// Echo-mode scoring: one request for the whole continuation. Falls back to
  /// the chain-rule path when echo_scoring is disabled; throws
  /// CapabilityError when the server answers without echo fields.
  double sequence_logprob(const TokenSequence& prompt,
                          const TokenSequence& continuation) const override;

  std::string detokenize(const TokenSequence& seq) const;

 protected:
  LogProbVector next_logprobs_impl(const TokenSequence& context) const override;

 private:
  nlohmann::json post_completion(const nlohmann::json& body) const;

  EndpointConfig cfg_;
  std::shared_ptr<QueryCache> cache_;
  std::shared_ptr<RemoteVocabulary> registry_;
};

}  // namespace aligntree
