#pragma once

#include "aligntree/provider.hpp"

namespace aligntree {

/// External high-fidelity scorer used only for evaluation, never for
/// guidance. Implementations must be deterministic.
class GoldScorer {
 public:
  virtual ~GoldScorer() = default;
  virtual const std::string& name() const = 0;
  virtual double score(const TokenSequence& prompt, const TokenSequence& response) const = 0;
};

/// Bayes-classifier gold reward over two class-conditional models:
/// log p(positive | x, y) - log p(negative | x, y)
///   = log_prior_ratio + log P_pos(y | x) - log P_neg(y | x).
/// Desk-scale runs back the classes with tabular fixtures; endpoints work the
/// same way through the gateway.
class ClassifierGoldScorer : public GoldScorer {
 public:
  ClassifierGoldScorer(ProviderPtr positive, ProviderPtr negative, double log_prior_ratio = 0.0);

  const std::string& name() const override { return name_; }
  double score(const TokenSequence& prompt, const TokenSequence& response) const override;

 private:
  ProviderPtr positive_;
  ProviderPtr negative_;
  double log_prior_ratio_;
  std::string name_;
};

/// p(y1 preferred over y2) = logistic(r1 - r2).
double preference_probability(double r1, double r2);

}  // namespace aligntree
