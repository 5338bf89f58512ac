#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "aligntree/provider.hpp"

namespace aligntree {

/// Exact language model backed by a conditional table. Contexts are keyed by
/// their trailing `order` tokens (order-n Markov truncation); order at least
/// the maximum query length makes the table full-context. Immutable after
/// construction and safe for concurrent queries.
class TabularLM : public ModelProvider {
 public:
  using RowMap = std::map<TokenSequence, LogProbVector>;

  TabularLM(std::string name, Vocabulary vocab, int order, RowMap rows);

  const std::string& name() const override { return name_; }
  const Vocabulary& vocab() const override { return vocab_; }
  int order() const { return order_; }
  const RowMap& rows() const { return rows_; }

  /// The trailing-token key a context resolves to.
  TokenSequence context_key(const TokenSequence& context) const;

 protected:
  LogProbVector next_logprobs_impl(const TokenSequence& context) const override;

 private:
  std::string name_;
  Vocabulary vocab_;
  int order_;
  RowMap rows_;
};

/// New model whose every row is the renormalized alpha-th power of the
/// corresponding base row. alpha = 1 reproduces the base model.
TabularLM power_scale_model(const TabularLM& base, double alpha);

/// Loads the tabular model document: fields `vocab` (ordered labels), `eos`
/// (label), `order`, and `rows` as {context: [labels], probs: [..]} entries.
/// Row probabilities must sum to 1 within 1e-6 and are renormalized exactly.
TabularLM load_tabular_model(const std::filesystem::path& path);

/// Writes the same document format.
void save_tabular_model(const TabularLM& model, const std::filesystem::path& path);

}  // namespace aligntree
