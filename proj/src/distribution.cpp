#include "aligntree/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aligntree {

LogProbVector logprobs_from_probs(const Eigen::ArrayXd& probs) {
  return (probs > 0.0).select(probs.log(), kNegInf);
}

void check_logprob_vector(const LogProbVector& dist, double tol) {
  if (dist.size() == 0) throw ArgumentError("empty log-prob vector");
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    double v = dist[i];
    if (std::isnan(v)) throw ArgumentError("NaN log-probability");
    if (v > 0.0) throw ArgumentError("positive log-probability " + std::to_string(v));
  }
  double sum = probs_of(dist).sum();
  if (std::abs(sum - 1.0) > tol)
    throw ArgumentError("log-prob vector exp-sums to " + std::to_string(sum));
}

LogProbVector log_normalize(const LogProbVector& dist) {
  double m = dist.maxCoeff();
  if (!std::isfinite(m)) throw ArgumentError("cannot normalize an all-zero distribution");
  double lse = m + std::log((dist - m).exp().sum());
  return dist - lse;
}

LogProbVector apply_temperature(const LogProbVector& dist, double temperature) {
  if (!(temperature > 0)) throw ArgumentError("temperature must be > 0");
  if (temperature == 1.0) return dist;  // exact identity
  return log_normalize(dist / temperature);
}

namespace {

// Token ids ordered by probability descending, ties by ascending id.
std::vector<int> by_prob_desc(const LogProbVector& dist) {
  std::vector<int> idx(static_cast<std::size_t>(dist.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return dist[a] > dist[b]; });
  return idx;
}

}  // namespace

LogProbVector truncate_top_k_top_p(const LogProbVector& dist, const SamplingParams& params) {
  params.validate();
  bool k_unlimited = params.top_k <= 0 || params.top_k >= dist.size();
  if (k_unlimited && params.top_p == 1.0) return dist;  // exact identity
  auto order = by_prob_desc(dist);
  std::size_t keep = order.size();
  if (params.top_k > 0 && static_cast<std::size_t>(params.top_k) < keep)
    keep = static_cast<std::size_t>(params.top_k);

  if (params.top_p < 1.0) {
    double cum = 0.0;
    std::size_t cut = keep;
    for (std::size_t i = 0; i < keep; ++i) {
      double p = std::exp(dist[order[i]]);
      cum += p;
      if (cum >= params.top_p) {
        cut = i + 1;
        break;
      }
    }
    keep = cut;  // all kept tokens when the mass never reaches top_p
  }

  LogProbVector out = LogProbVector::Constant(dist.size(), kNegInf);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = dist[order[i]];
  return log_normalize(out);
}

double entropy(const LogProbVector& dist) {
  // Mask p = 0 entries: 0 * ln 0 = 0.
  Eigen::ArrayXd contrib = (dist.isFinite()).select(dist.exp() * dist, 0.0);
  double h = -contrib.sum();
  return h < 0.0 ? 0.0 : h;
}

TokenId sample_token(const LogProbVector& dist, Rng& rng) {
  Eigen::ArrayXd p = probs_of(dist);
  double total = p.sum();
  if (!(total > 0)) throw ArgumentError("cannot sample from an all-zero distribution");
  double u = rng.next_double() * total;
  double cum = 0.0;
  TokenId last_positive = -1;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = static_cast<TokenId>(i);
    cum += p[i];
    if (u < cum) return last_positive;
  }
  return last_positive;  // rounding pushed u past the last bucket
}

std::vector<TokenId> sample_distinct(const LogProbVector& dist, int k, Rng& rng) {
  if (k < 0) throw ArgumentError("k must be non-negative");
  Eigen::ArrayXd p = probs_of(dist);
  std::vector<TokenId> out;
  while (static_cast<int>(out.size()) < k) {
    double total = p.sum();
    if (!(total > 0)) break;  // positive support exhausted
    double u = rng.next_double() * total;
    double cum = 0.0;
    TokenId pick = -1;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      pick = static_cast<TokenId>(i);
      cum += p[i];
      if (u < cum) break;
    }
    out.push_back(pick);
    p[pick] = 0.0;
  }
  return out;
}

double chunk_prior(std::span<const double> token_probs) {
  if (token_probs.empty()) throw ArgumentError("chunk_prior of an empty chunk");
  double log_sum = 0.0;
  for (double p : token_probs) {
    if (!(p > 0.0) || p > 1.0)
      throw ArgumentError("chunk_prior expects probabilities in (0, 1], got " + std::to_string(p));
    log_sum += std::log(p);
  }
  return std::exp(log_sum / static_cast<double>(token_probs.size()));
}

}  // namespace aligntree
