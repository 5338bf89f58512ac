#include "aligntree/gold.hpp"

#include <cmath>

namespace aligntree {

ClassifierGoldScorer::ClassifierGoldScorer(ProviderPtr positive, ProviderPtr negative,
                                           double log_prior_ratio)
    : positive_(std::move(positive)),
      negative_(std::move(negative)),
      log_prior_ratio_(log_prior_ratio) {
  if (!positive_ || !negative_) throw ArgumentError("gold scorer requires both class models");
  if (!(positive_->vocab() == negative_->vocab()))
    throw ArgumentError("gold class models must share one vocabulary");
  name_ = "gold(" + positive_->name() + "," + negative_->name() + ")";
}

double ClassifierGoldScorer::score(const TokenSequence& prompt,
                                   const TokenSequence& response) const {
  double pos = positive_->sequence_logprob(prompt, response);
  double neg = negative_->sequence_logprob(prompt, response);
  if (std::isinf(pos) && std::isinf(neg))
    throw UndefinedRatioError("both gold class models assign probability zero");
  return log_prior_ratio_ + pos - neg;
}

double preference_probability(double r1, double r2) {
  double d = r1 - r2;
  // Evaluate the stable branch to avoid overflow for large |d|.
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  double e = std::exp(d);
  return e / (1.0 + e);
}

}  // namespace aligntree
