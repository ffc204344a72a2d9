#pragma once

#include <string>
#include <vector>

#include "mtgrid/common/rng.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/tokenizer/sequence.hpp"

namespace mtgrid::testing {

// Small vocabulary and model used wherever a test needs a real forward pass.
inline UnifiedVocab tiny_vocab() {
  return UnifiedVocab({"red", "blue", "square", "circle", "a", "of"});
}

inline constexpr int kTinySide = 4;
inline constexpr int kTinyImageLen = kTinySide * kTinySide;
inline constexpr int kTinyPromptLen = 4;

inline ModelConfig tiny_config(int n_layers = 1, int d_model = 8, int n_heads = 2,
                               std::uint64_t seed = 7) {
  const UnifiedVocab vocab = tiny_vocab();
  ModelConfig c;
  c.n_layers = n_layers;
  c.n_heads = n_heads;
  c.d_model = d_model;
  c.d_ff = 4 * d_model;
  c.vocab_size = vocab.size();
  c.image_offset = vocab.image_offset();
  c.codebook_size = vocab.codebook_size();
  c.max_seq_len = t2i_sequence_length(kTinyPromptLen, kTinyImageLen);
  c.rng_seed = seed;
  return c;
}

// Initialized parameters with norm weights and gains moved off their initial
// constants so every tensor takes part in a non-trivial way.
inline Parameters jittered_parameters(const ModelConfig& config, std::uint64_t seed) {
  Parameters p = init_parameters(config);
  Rng rng(seed);
  for (auto& [name, t] : p) {
    if (t.shape.size() == 1) {
      for (float& v : t.data) v += static_cast<float>(0.3 * rng.normal());
    } else {
      for (float& v : t.data) v *= 10.0f;  // larger than init so attention is not uniform
    }
  }
  return p;
}

inline std::vector<TokenId> random_prompt(const UnifiedVocab& vocab, int len, Rng& rng) {
  std::vector<TokenId> ids;
  for (int i = 0; i < len; ++i) {
    ids.push_back(kNumSpecials + static_cast<TokenId>(rng.below(vocab.text_size())));
  }
  return ids;
}

inline std::vector<TokenId> random_image(const UnifiedVocab& vocab, int len, Rng& rng) {
  std::vector<TokenId> ids;
  for (int i = 0; i < len; ++i) {
    ids.push_back(vocab.image_offset() + static_cast<TokenId>(rng.below(vocab.codebook_size())));
  }
  return ids;
}

}  // namespace mtgrid::testing
