#include "aligntree/vocab.hpp"

#include <sstream>

namespace aligntree {

void validate_sequence(const Vocabulary& vocab, const TokenSequence& seq) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    TokenId id = seq[i];
    if (id < 0 || id >= vocab.size())
      throw ArgumentError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                          std::to_string(vocab.size()));
    if (id == vocab.eos() && i + 1 != seq.size())
      throw ArgumentError("EOS may only appear as the final token");
  }
}

bool contains_eos(const Vocabulary& vocab, const TokenSequence& seq) {
  for (TokenId id : seq)
    if (id == vocab.eos()) return true;
  return false;
}

TokenSequence concat(const TokenSequence& a, const TokenSequence& b) {
  TokenSequence out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::string render(const Vocabulary& vocab, const TokenSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += vocab.label(seq[i]);
  }
  return out;
}

TokenSequence parse_labels(const Vocabulary& vocab, const std::string& text) {
  TokenSequence out;
  std::istringstream in(text);
  std::string label;
  while (in >> label) out.push_back(vocab.require(label));
  return out;
}

}  // namespace aligntree
