#include "aligntree/baselines.hpp"

#include <algorithm>

namespace aligntree {

TokenSequence base_generate(const ModelProvider& strong, const TokenSequence& prompt,
                            const SamplingParams& sampling, int cap, Rng& rng) {
  if (cap < 1) throw ArgumentError("cap must be positive");
  sampling.validate();
  const Vocabulary& vocab = strong.vocab();
  TokenSequence out;
  TokenSequence context = prompt;
  while (static_cast<int>(out.size()) < cap) {
    LogProbVector dist = apply_temperature(strong.next_token_logprobs(context),
                                           sampling.temperature);
    TokenId token = sample_token(truncate_top_k_top_p(dist, sampling), rng);
    out.push_back(token);
    if (token == vocab.eos()) break;
    context.push_back(token);
  }
  return out;
}

TokenSequence best_of_n(const ModelProvider& strong, const WeakPair& pair,
                        const TokenSequence& prompt, const BonConfig& cfg, int cap) {
  cfg.validate();
  TokenSequence best;
  double best_score = 0.0;
  for (int i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    TokenSequence sample = base_generate(strong, prompt, cfg.sampling, cap, rng);
    double score = global_score(pair, prompt, sample);
    if (i == 0 || score > best_score) {
      best = std::move(sample);
      best_score = score;
    }
  }
  return best;
}

namespace {

struct Beam {
  TokenSequence continuation;
  double score = 0.0;  // prefix proxy value; equals the global score once finished
  bool finished = false;
  long creation = 0;
};

}  // namespace

TokenSequence cbs_generate(const ModelProvider& strong, const WeakPair& pair,
                           const TokenSequence& prompt, const CbsConfig& cfg, int cap) {
  cfg.validate();
  if (cap < 1) throw ArgumentError("cap must be positive");
  const Vocabulary& vocab = strong.vocab();
  Rng rng(cfg.seed);

  long next_creation = 1;
  std::vector<Beam> beams{Beam{}};  // the beam set grows to W after the first round

  auto all_finished = [&] {
    return std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; });
  };

  while (!all_finished()) {
    std::vector<Beam> proposals;
    for (const Beam& beam : beams) {
      if (beam.finished) {
        proposals.push_back(beam);  // frozen: competes but proposes nothing
        continue;
      }
      TokenSequence context = concat(prompt, beam.continuation);
      LogProbVector first_dist = truncate_top_k_top_p(
          apply_temperature(strong.next_token_logprobs(context), cfg.sampling.temperature),
          cfg.sampling);
      std::vector<TokenId> firsts = sample_distinct(first_dist, cfg.successors, rng);
      for (TokenId first : firsts) {
        Beam ext;
        ext.continuation = beam.continuation;
        ext.continuation.push_back(first);
        TokenSequence ext_context = context;
        ext_context.push_back(first);
        int chunk_len = 1;
        while (ext.continuation.back() != vocab.eos() &&
               static_cast<int>(ext.continuation.size()) < cap && chunk_len < cfg.chunk_length) {
          LogProbVector step = truncate_top_k_top_p(
              apply_temperature(strong.next_token_logprobs(ext_context),
                                cfg.sampling.temperature),
              cfg.sampling);
          TokenId token = sample_token(step, rng);
          ext.continuation.push_back(token);
          ext_context.push_back(token);
          ++chunk_len;
        }
        ext.finished = ext.continuation.back() == vocab.eos() ||
                       static_cast<int>(ext.continuation.size()) >= cap;
        ext.score = v_proxy(pair, prompt, ext.continuation);
        ext.creation = next_creation++;
        proposals.push_back(std::move(ext));
      }
    }
    std::stable_sort(proposals.begin(), proposals.end(), [](const Beam& a, const Beam& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.creation < b.creation;
    });
    if (static_cast<int>(proposals.size()) > cfg.beam_width)
      proposals.resize(static_cast<std::size_t>(cfg.beam_width));
    beams = std::move(proposals);
  }

  const Beam* best = nullptr;
  for (const Beam& beam : beams)
    if (!best || beam.score > best->score ||
        (beam.score == best->score && beam.creation < best->creation))
      best = &beam;
  return best->continuation;
}

}  // namespace aligntree
