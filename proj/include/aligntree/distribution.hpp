#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "aligntree/common.hpp"
#include "aligntree/vocab.hpp"

namespace aligntree {

/// Full conditional next-token distribution in natural-log space, one entry
/// per vocabulary token. Probability zero is the -inf sentinel. Every vector
/// produced by the functions below exp-sums to 1 within 1e-9.
using LogProbVector = Eigen::ArrayXd;

/// Sampling transforms applied to the strong model's distribution.
/// top_k <= 0 means unlimited.
struct SamplingParams {
  double temperature = 0.7;
  int top_k = 50;
  double top_p = 1.0;

  void validate() const {
    if (!(temperature > 0)) throw ArgumentError("temperature must be > 0");
    if (!(top_p > 0) || top_p > 1.0) throw ArgumentError("top_p must be in (0, 1]");
  }
};

/// exp(v) with the -inf sentinel mapped to probability 0. Eigen's vectorized
/// exp turns -inf into a denormal, so the sentinel entries are masked.
inline Eigen::ArrayXd probs_of(const LogProbVector& dist) {
  return (dist.isFinite()).select(dist.exp(), 0.0);
}

/// log(p) elementwise; p == 0 maps to -inf.
LogProbVector logprobs_from_probs(const Eigen::ArrayXd& probs);

/// Throws unless exp-sum is 1 within `tol` and no entry is positive.
void check_logprob_vector(const LogProbVector& dist, double tol = 1e-9);

/// log-softmax: shifts so the vector exp-sums to exactly 1.
LogProbVector log_normalize(const LogProbVector& dist);

/// Divides each log-probability by `temperature` and renormalizes.
/// temperature = 1 is the identity.
LogProbVector apply_temperature(const LogProbVector& dist, double temperature);

/// Keeps the top_k tokens by probability, then the smallest prefix of those
/// whose cumulative mass reaches top_p, and renormalizes. Ties at either cut
/// break by ascending token id. top_k <= 0 or larger than the support is a
/// no-op for the first stage.
LogProbVector truncate_top_k_top_p(const LogProbVector& dist, const SamplingParams& params);

/// Shannon entropy -sum p ln p with 0 ln 0 = 0. Range [0, ln(size)].
double entropy(const LogProbVector& dist);

/// Draws one token proportionally to exp(dist). Consumes exactly one rng
/// draw; fully determined by the rng state.
TokenId sample_token(const LogProbVector& dist, Rng& rng);

/// Draws up to `k` distinct tokens without replacement, each proportionally
/// to the remaining (renormalized) mass. Returns fewer than k when the
/// positive support is smaller. One rng draw per returned token; the first
/// draw is identical to sample_token on the same dist.
std::vector<TokenId> sample_distinct(const LogProbVector& dist, int k, Rng& rng);

/// Geometric mean of token-level probabilities: exp(mean of logs).
/// All entries must lie in (0, 1].
double chunk_prior(std::span<const double> token_probs);

}  // namespace aligntree
