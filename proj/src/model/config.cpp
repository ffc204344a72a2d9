#include "mtgrid/model/config.hpp"

#include <string>

#include "mtgrid/common/error.hpp"
#include "mtgrid/tokenizer/vocab.hpp"

namespace mtgrid {

void validate_config(const ModelConfig& c) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw InvalidArgument(std::string("model config: ") + name + " must be >= 1");
  };
  positive(c.n_layers, "n_layers");
  positive(c.n_heads, "n_heads");
  positive(c.d_model, "d_model");
  positive(c.d_ff, "d_ff");
  positive(c.vocab_size, "vocab_size");
  positive(c.max_seq_len, "max_seq_len");
  positive(c.codebook_size, "codebook_size");
  if (c.d_model % c.n_heads != 0) {
    throw InvalidArgument("model config: d_model must be divisible by n_heads");
  }
  if (c.image_offset < 0 || c.image_offset + c.codebook_size > c.vocab_size) {
    throw InvalidArgument("model config: image slice outside the vocabulary");
  }
}

ModelConfig make_model_config(const UnifiedVocab& vocab, int max_seq_len,
                              std::uint64_t rng_seed) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.image_offset = vocab.image_offset();
  c.codebook_size = vocab.codebook_size();
  c.max_seq_len = max_seq_len;
  c.rng_seed = rng_seed;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},         {"n_heads", c.n_heads},
                     {"d_model", c.d_model},           {"d_ff", c.d_ff},
                     {"vocab_size", c.vocab_size},     {"max_seq_len", c.max_seq_len},
                     {"image_offset", c.image_offset}, {"codebook_size", c.codebook_size},
                     {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("n_layers").get_to(c.n_layers);
  j.at("n_heads").get_to(c.n_heads);
  j.at("d_model").get_to(c.d_model);
  j.at("d_ff").get_to(c.d_ff);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_seq_len").get_to(c.max_seq_len);
  j.at("image_offset").get_to(c.image_offset);
  j.at("codebook_size").get_to(c.codebook_size);
  j.at("rng_seed").get_to(c.rng_seed);
}

}  // namespace mtgrid
