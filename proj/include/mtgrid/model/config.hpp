#pragma once

#include <cstdint>

#include "json.hpp"

namespace mtgrid {

class UnifiedVocab;

struct ModelConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  int vocab_size = 0;
  int max_seq_len = 0;
  // First image token id and codebook size; the output head reads these
  // columns of the tied embedding.
  int image_offset = 0;
  int codebook_size = 16;
  std::uint64_t rng_seed = 0;

  int head_dim() const { return d_model / n_heads; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws InvalidArgument unless every dimension is positive, d_model is
// divisible by n_heads and the image slice lies inside the vocabulary.
void validate_config(const ModelConfig& config);

// Default-sized config for a vocabulary and sequence length.
ModelConfig make_model_config(const UnifiedVocab& vocab, int max_seq_len,
                              std::uint64_t rng_seed = 0);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace mtgrid
