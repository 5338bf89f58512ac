#include "aligntree/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

namespace aligntree {

std::string api_key_from_env() {
  const char* key = std::getenv("ALIGNTREE_API_KEY");
  return key ? key : "";
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

// ============================================================================
// QueryCache
// ============================================================================

QueryCache::QueryCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  if (!in) return;  // a fresh cache file is created on first write
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      entries_[rec.at("key").get<std::string>()] = rec.at("fragment");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("corrupt cache record in " + path_.string() + ": " + e.what());
    }
  }
}

std::optional<nlohmann::json> QueryCache::lookup(const std::string& key) const {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t QueryCache::size() const {
  std::lock_guard<std::mutex> lk(mu_);
  return entries_.size();
}

void QueryCache::append_record_locked(const std::string& key, const nlohmann::json& meta,
                                      const nlohmann::json& fragment) {
  if (path_.empty()) return;
  nlohmann::json rec = meta;
  rec["key"] = key;
  rec["fragment"] = fragment;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw ProviderError("cannot append to cache file " + path_.string());
  out << rec.dump() << "\n";
}

nlohmann::json QueryCache::fetch_or_compute(const std::string& key, const nlohmann::json& meta,
                                            const std::function<nlohmann::json()>& fetch) {
  std::unique_lock<std::mutex> lk(mu_);
  for (;;) {
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    if (!pending_.count(key)) break;
    cv_.wait(lk);  // identical request already in flight
  }
  pending_[key] = 1;
  lk.unlock();

  nlohmann::json fragment;
  try {
    fragment = fetch();
  } catch (...) {
    lk.lock();
    pending_.erase(key);
    cv_.notify_all();
    throw;
  }

  lk.lock();
  entries_[key] = fragment;
  append_record_locked(key, meta, fragment);
  pending_.erase(key);
  cv_.notify_all();
  return fragment;
}

// ============================================================================
// RemoteVocabulary
// ============================================================================

RemoteVocabulary::RemoteVocabulary(const std::string& eos_label)
    : vocab_({eos_label}, /*eos=*/0) {}

TokenId RemoteVocabulary::token_for(const std::string& label) {
  std::lock_guard<std::mutex> lk(mu_);
  return vocab_.add_label(label);
}

// ============================================================================
// RemoteProvider
// ============================================================================

RemoteProvider::RemoteProvider(EndpointConfig cfg, std::shared_ptr<QueryCache> cache,
                               std::shared_ptr<RemoteVocabulary> registry)
    : cfg_(std::move(cfg)), cache_(std::move(cache)), registry_(std::move(registry)) {
  cfg_.validate();
  if (!cache_ || !registry_) throw ArgumentError("gateway requires a cache and a registry");
}

std::string RemoteProvider::detokenize(const TokenSequence& seq) const {
  std::string out;
  for (TokenId id : seq) out += vocab().label(id);
  return out;
}

nlohmann::json RemoteProvider::post_completion(const nlohmann::json& body) const {
  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_seconds));
  if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);

  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(50ll << (attempt - 1)));
    auto res = client.Post("/v1/completions", payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;  // retryable
    }
    if (res->status != 200)
      throw ProviderError("endpoint " + cfg_.base_url + " answered HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("endpoint returned malformed JSON: " + std::string(e.what()), res->body);
    }
  }
  throw ProviderError("endpoint " + cfg_.base_url + " unreachable after " +
                      std::to_string(cfg_.max_retries + 1) + " attempts (" + last_error + ")");
}

LogProbVector RemoteProvider::next_logprobs_impl(const TokenSequence& context) const {
  std::string text = detokenize(context);
  std::string key_material = "next\x1f" + cfg_.model_name + "\x1f" +
                             std::to_string(cfg_.logprob_top_k) + "\x1f" + text;
  std::string key = std::to_string(fnv1a64(key_material));

  nlohmann::json meta{{"mode", "next"}, {"model", cfg_.model_name}, {"prompt", text}};
  nlohmann::json fragment = cache_->fetch_or_compute(key, meta, [&] {
    nlohmann::json body{{"model", cfg_.model_name}, {"prompt", text},       {"max_tokens", 1},
                        {"logprobs", cfg_.logprob_top_k}, {"temperature", 1}};
    nlohmann::json response = post_completion(body);
    try {
      const auto& top = response.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
      if (!top.is_object() || top.empty())
        throw ProtocolError("top_logprobs[0] is empty", response.dump());
      return nlohmann::json{{"alts", top}};
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("cannot extract top_logprobs: " + std::string(e.what()),
                          response.dump());
    }
  });

  // Register the returned support, then renormalize over it.
  const auto& alts = fragment.at("alts");
  std::vector<std::pair<TokenId, double>> support;
  support.reserve(alts.size());
  for (const auto& [token, lp] : alts.items())
    support.emplace_back(registry_->token_for(token), lp.get<double>());

  LogProbVector out = LogProbVector::Constant(vocab().size(), kNegInf);
  for (const auto& [id, lp] : support) out[id] = lp;
  return log_normalize(out);
}

double RemoteProvider::sequence_logprob(const TokenSequence& prompt,
                                        const TokenSequence& continuation) const {
  if (continuation.empty()) return 0.0;
  if (!cfg_.echo_scoring) return ModelProvider::sequence_logprob(prompt, continuation);
  validate_sequence(vocab(), continuation);

  std::string base_text = detokenize(prompt);
  std::string full_text = base_text + detokenize(continuation);
  std::string key_material = "echo\x1f" + cfg_.model_name + "\x1f" + full_text;
  std::string key = std::to_string(fnv1a64(key_material));

  nlohmann::json meta{{"mode", "echo"}, {"model", cfg_.model_name}, {"prompt", full_text}};
  nlohmann::json fragment = cache_->fetch_or_compute(key, meta, [&] {
    nlohmann::json body{{"model", cfg_.model_name}, {"prompt", full_text}, {"max_tokens", 0},
                        {"echo", true},             {"logprobs", cfg_.logprob_top_k},
                        {"temperature", 1}};
    nlohmann::json response = post_completion(body);
    try {
      const auto& logprobs = response.at("choices").at(0).at("logprobs");
      if (!logprobs.contains("token_logprobs") || !logprobs.contains("text_offset"))
        throw CapabilityError(
            "endpoint does not support echo scoring; set echo_scoring=false to use the "
            "per-token fallback");
      return nlohmann::json{{"token_logprobs", logprobs.at("token_logprobs")},
                            {"text_offset", logprobs.at("text_offset")}};
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError("cannot extract echo logprobs: " + std::string(e.what()),
                          response.dump());
    }
  });

  const auto& token_logprobs = fragment.at("token_logprobs");
  const auto& text_offset = fragment.at("text_offset");
  if (token_logprobs.size() != text_offset.size())
    throw ProtocolError("echo arrays disagree in length", fragment.dump());

  double total = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    if (text_offset[i].get<std::size_t>() < base_text.size()) continue;
    if (token_logprobs[i].is_null())
      throw ProtocolError(
          "server reported no log-probability for a continuation token (empty prompt?)",
          fragment.dump());
    total += token_logprobs[i].get<double>();
  }
  return total;
}

}  // namespace aligntree
