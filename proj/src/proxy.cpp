#include "aligntree/proxy.hpp"

#include <cmath>

namespace aligntree {

ProxyValue v_proxy(const WeakPair& pair, const TokenSequence& prompt, const TokenSequence& partial) {
  double aligned_lp = pair.aligned->sequence_logprob(prompt, partial);
  double reference_lp = pair.reference->sequence_logprob(prompt, partial);
  if (std::isinf(aligned_lp) && std::isinf(reference_lp))
    throw UndefinedRatioError("both weak models assign probability zero to '" +
                              render(pair.aligned->vocab(), partial) + "'");
  return aligned_lp - reference_lp;
}

AlignmentScore global_score(const WeakPair& pair, const TokenSequence& prompt,
                            const TokenSequence& full) {
  return v_proxy(pair, prompt, full);
}

}  // namespace aligntree
