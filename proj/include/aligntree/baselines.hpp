#pragma once

#include "aligntree/proxy.hpp"

namespace aligntree {

struct BonConfig {
  int n = 16;
  SamplingParams sampling;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw ArgumentError("n must be positive");
    sampling.validate();
  }
};

struct CbsConfig {
  int beam_width = 4;   ///< W
  int successors = 4;   ///< K, chunks proposed per live beam
  int chunk_length = 5; ///< L
  SamplingParams sampling;
  std::uint64_t seed = 0;

  void validate() const {
    if (beam_width < 1 || successors < 1 || chunk_length < 1)
      throw ArgumentError("beam parameters must be positive");
    sampling.validate();
  }
};

/// Plain autoregressive sampling through temperature / top-k / top-p until
/// EOS or `cap` continuation tokens. Deterministic per rng state.
TokenSequence base_generate(const ModelProvider& strong, const TokenSequence& prompt,
                            const SamplingParams& sampling, int cap, Rng& rng);

/// Draws n independent samples on seed-derived substreams and returns the one
/// with the highest global alignment score (ties by sample index). Substream
/// i depends only on (seed, i), so growing n extends the sample set.
TokenSequence best_of_n(const ModelProvider& strong, const WeakPair& pair,
                        const TokenSequence& prompt, const BonConfig& cfg, int cap);

/// Chunk-level beam search: W beams, each live beam proposing K distinct-first
/// -token chunks of up to L tokens per round, extensions ranked by the prefix
/// proxy value. Finished beams stop proposing but keep competing; the
/// finished beam with the highest global score wins.
TokenSequence cbs_generate(const ModelProvider& strong, const WeakPair& pair,
                           const TokenSequence& prompt, const CbsConfig& cfg, int cap);

}  // namespace aligntree
