#include "aligntree/provider.hpp"

namespace aligntree {

double ModelProvider::sequence_logprob(const TokenSequence& prompt,
                                       const TokenSequence& continuation) const {
  validate_sequence(vocab(), continuation);
  double total = 0.0;
  TokenSequence context = prompt;
  context.reserve(prompt.size() + continuation.size());
  for (TokenId token : continuation) {
    LogProbVector dist = next_token_logprobs(context);
    if (token < 0 || token >= dist.size())
      throw ArgumentError("token id out of range while scoring");
    total += dist[token];  // -inf is absorbing
    context.push_back(token);
  }
  return total;
}

double sequence_logprob(const ModelProvider& provider, const TokenSequence& prompt,
                        const TokenSequence& continuation) {
  return provider.sequence_logprob(prompt, continuation);
}

}  // namespace aligntree
