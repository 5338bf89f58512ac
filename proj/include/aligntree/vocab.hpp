#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aligntree/common.hpp"

namespace aligntree {

/// Index into a Vocabulary. Token ids are the interface; there is no
/// tokenizer in-process.
using TokenId = std::int32_t;

/// Prompt, response, or prefix as an ordered token-id list.
using TokenSequence = std::vector<TokenId>;

/// The token alphabet shared by every provider in a run. `size()` may grow
/// for gateway-backed vocabularies (server-reported tokens are registered on
/// first sight); tabular vocabularies are fixed after construction.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> labels, TokenId eos)
      : labels_(std::move(labels)), eos_(eos) {
    if (labels_.empty()) throw ArgumentError("vocabulary must not be empty");
    if (eos_ < 0 || static_cast<std::size_t>(eos_) >= labels_.size())
      throw ArgumentError("EOS id out of range");
  }

  /// Unlabeled vocabulary of `size` tokens named t0..t{size-1}.
  static Vocabulary unlabeled(int size, TokenId eos) {
    std::vector<std::string> labels;
    labels.reserve(size);
    for (int i = 0; i < size; ++i) labels.push_back("t" + std::to_string(i));
    return Vocabulary(std::move(labels), eos);
  }

  int size() const { return static_cast<int>(labels_.size()); }
  TokenId eos() const { return eos_; }

  const std::string& label(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= labels_.size())
      throw ArgumentError("token id " + std::to_string(id) + " out of range");
    return labels_[id];
  }

  std::optional<TokenId> find(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return static_cast<TokenId>(i);
    return std::nullopt;
  }

  TokenId require(const std::string& label) const {
    auto id = find(label);
    if (!id) throw ArgumentError("unknown token label '" + label + "'");
    return *id;
  }

  /// Registers a new label (gateway vocabularies only). Returns the existing
  /// id when the label is already known.
  TokenId add_label(const std::string& label) {
    if (auto id = find(label)) return *id;
    labels_.push_back(label);
    return static_cast<TokenId>(labels_.size() - 1);
  }

  bool operator==(const Vocabulary& other) const {
    return eos_ == other.eos_ && labels_ == other.labels_;
  }

 private:
  std::vector<std::string> labels_;
  TokenId eos_;
};

/// Checks ids in range and EOS, if present, final and unique.
void validate_sequence(const Vocabulary& vocab, const TokenSequence& seq);

/// True when `seq` ends in EOS.
inline bool ends_in_eos(const Vocabulary& vocab, const TokenSequence& seq) {
  return !seq.empty() && seq.back() == vocab.eos();
}

/// True when `seq` contains EOS anywhere. Contexts handed to a provider must
/// never contain EOS.
bool contains_eos(const Vocabulary& vocab, const TokenSequence& seq);

/// a ++ b
TokenSequence concat(const TokenSequence& a, const TokenSequence& b);

/// Space-joined labels ("A B <eos>"). Empty sequence renders as "".
std::string render(const Vocabulary& vocab, const TokenSequence& seq);

/// Inverse of render for whitespace-separated labels.
TokenSequence parse_labels(const Vocabulary& vocab, const std::string& text);

}  // namespace aligntree
