#pragma once

#include <memory>
#include <string>

#include "aligntree/distribution.hpp"
#include "aligntree/vocab.hpp"

namespace aligntree {

/// Abstract conditional next-token log-prob source. Implementations must be
/// deterministic (identical context, identical vector) and safe for
/// concurrent read-only queries.
class ModelProvider {
 public:
  virtual ~ModelProvider() = default;

  virtual const std::string& name() const = 0;
  virtual const Vocabulary& vocab() const = 0;

  /// Full conditional distribution at `context`. Querying a context that
  /// contains EOS is a contract violation: generation already terminated.
  LogProbVector next_token_logprobs(const TokenSequence& context) const {
    if (contains_eos(vocab(), context))
      throw ArgumentError("provider '" + name() + "' queried past EOS (context '" +
                          render(vocab(), context) + "')");
    return next_logprobs_impl(context);
  }

  /// Chain-rule log-probability of `continuation` given `prompt`:
  /// sum_t log pi(y_t | prompt, y_<t). Empty continuation scores 0.
  /// Remote providers may override with server-side echo scoring.
  virtual double sequence_logprob(const TokenSequence& prompt, const TokenSequence& continuation) const;

 protected:
  virtual LogProbVector next_logprobs_impl(const TokenSequence& context) const = 0;
};

double sequence_logprob(const ModelProvider& provider, const TokenSequence& prompt,
                        const TokenSequence& continuation);

using ProviderPtr = std::shared_ptr<const ModelProvider>;

}  // namespace aligntree
