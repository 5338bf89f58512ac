#pragma once

#include "aligntree/provider.hpp"

namespace aligntree {

/// Aligned / unaligned weak model pair. The log-prob difference between the
/// two is the alignment signal; both models must share one vocabulary.
struct WeakPair {
  ProviderPtr aligned;
  ProviderPtr reference;

  WeakPair(ProviderPtr aligned_model, ProviderPtr reference_model)
      : aligned(std::move(aligned_model)), reference(std::move(reference_model)) {
    if (!aligned || !reference) throw ArgumentError("weak pair requires both models");
    if (!(aligned->vocab() == reference->vocab()))
      throw ArgumentError("weak pair models must share one vocabulary");
  }
};

/// Log-likelihood-ratio units.
using ProxyValue = double;
using AlignmentScore = double;

/// Prefix proxy value: log p_aligned(partial | prompt) - log p_reference(...).
/// Empty partial scores 0. Throws UndefinedRatioError when both models assign
/// probability zero.
ProxyValue v_proxy(const WeakPair& pair, const TokenSequence& prompt, const TokenSequence& partial);

/// Global alignment score of a complete sequence: the same log-prob
/// difference evaluated on the full continuation.
AlignmentScore global_score(const WeakPair& pair, const TokenSequence& prompt,
                            const TokenSequence& full);

}  // namespace aligntree
