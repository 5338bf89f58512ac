#include "aligntree/tabular.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace aligntree {

TabularLM::TabularLM(std::string name, Vocabulary vocab, int order, RowMap rows)
    : name_(std::move(name)), vocab_(std::move(vocab)), order_(order), rows_(std::move(rows)) {
  if (order_ < 0) throw ArgumentError("order must be non-negative");
  for (const auto& [context, row] : rows_) {
    if (static_cast<int>(context.size()) > order_)
      throw ArgumentError("row context longer than order");
    if (row.size() != vocab_.size())
      throw ArgumentError("row width does not match vocabulary size");
    check_logprob_vector(row);
  }
}

TokenSequence TabularLM::context_key(const TokenSequence& context) const {
  std::size_t window = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_));
  return TokenSequence(context.end() - static_cast<std::ptrdiff_t>(window), context.end());
}

LogProbVector TabularLM::next_logprobs_impl(const TokenSequence& context) const {
  TokenSequence key = context_key(context);
  auto it = rows_.find(key);
  if (it == rows_.end())
    throw UnknownContextError("model '" + name_ + "' has no row for context '" +
                              render(vocab_, key) + "' (full context '" + render(vocab_, context) +
                              "')");
  return it->second;
}

TabularLM power_scale_model(const TabularLM& base, double alpha) {
  if (!(alpha > 0)) throw ArgumentError("alpha must be > 0");
  TabularLM::RowMap rows;
  for (const auto& [context, row] : base.rows())
    rows.emplace(context, alpha == 1.0 ? row : log_normalize(row * alpha));
  return TabularLM(base.name() + "^" + std::to_string(alpha), base.vocab(), base.order(),
                   std::move(rows));
}

TabularLM load_tabular_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tabular model file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed tabular model file " + path.string() + ": " + e.what());
  }

  try {
    auto labels = doc.at("vocab").get<std::vector<std::string>>();
    std::string eos_label = doc.at("eos").get<std::string>();
    Vocabulary vocab(labels, 0);
    vocab = Vocabulary(labels, vocab.require(eos_label));
    int order = doc.at("order").get<int>();

    TabularLM::RowMap rows;
    for (const auto& entry : doc.at("rows")) {
      TokenSequence context;
      for (const auto& label : entry.at("context")) context.push_back(vocab.require(label));
      auto probs = entry.at("probs").get<std::vector<double>>();
      if (probs.size() != static_cast<std::size_t>(vocab.size()))
        throw ConfigError("row has " + std::to_string(probs.size()) + " probabilities, expected " +
                          std::to_string(vocab.size()));
      double sum = 0.0;
      for (double p : probs) {
        if (p < 0) throw ConfigError("negative probability in row");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw ConfigError("row for context '" + render(vocab, context) + "' sums to " +
                          std::to_string(sum));
      Eigen::ArrayXd p(vocab.size());
      for (int i = 0; i < vocab.size(); ++i) p[i] = probs[static_cast<std::size_t>(i)] / sum;
      if (!rows.emplace(std::move(context), logprobs_from_probs(p)).second)
        throw ConfigError("duplicate row context in " + path.string());
    }
    return TabularLM(path.stem().string(), std::move(vocab), order, std::move(rows));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid tabular model document " + path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError("invalid tabular model document " + path.string() + ": " + e.what());
  }
}

void save_tabular_model(const TabularLM& model, const std::filesystem::path& path) {
  nlohmann::json doc;
  const Vocabulary& vocab = model.vocab();
  for (int i = 0; i < vocab.size(); ++i) doc["vocab"].push_back(vocab.label(i));
  doc["eos"] = vocab.label(vocab.eos());
  doc["order"] = model.order();
  doc["rows"] = nlohmann::json::array();
  for (const auto& [context, row] : model.rows()) {
    nlohmann::json entry;
    entry["context"] = nlohmann::json::array();
    for (TokenId id : context) entry["context"].push_back(vocab.label(id));
    Eigen::ArrayXd p = probs_of(row);
    entry["probs"] = std::vector<double>(p.data(), p.data() + p.size());
    doc["rows"].push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write tabular model file " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace aligntree
