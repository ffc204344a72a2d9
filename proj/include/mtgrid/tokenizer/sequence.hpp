#pragma once

#include <span>
#include <vector>

#include "mtgrid/tokenizer/vocab.hpp"

namespace mtgrid {

// Half-open index range [start, end).
struct Span {
  int start = 0;
  int end = 0;
  int size() const { return end - start; }
  bool contains(int i) const { return i >= start && i < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

// Where the prompt and image live inside a unified sequence. The spans hold
// content tokens only; the blocks add the bracketing special tokens, which
// follow the attention rule of the span they bracket. Positions outside both
// blocks are padding.
struct SequenceLayout {
  Span text_span;
  Span image_span;
  Span text_block;
  Span image_block;
  int total_len = 0;

  bool is_padding(int position) const {
    return !text_block.contains(position) && !image_block.contains(position);
  }
  friend bool operator==(const SequenceLayout&, const SequenceLayout&) = default;
};

// Layout whose blocks equal its spans (no bracketing specials, no padding).
SequenceLayout bare_layout(int text_len, int image_len);

// Throws InvalidArgument unless blocks are ordered text before image, each
// block contains its span, and everything fits inside total_len.
void validate_layout(const SequenceLayout& layout);

struct TokenSequence {
  std::vector<TokenId> ids;
  SequenceLayout layout;
};

// Fixed total length of an assembled text-to-image sequence.
inline constexpr int t2i_sequence_length(int max_text_len, int image_len) {
  return 5 + max_text_len + image_len;
}

// [T2I][SOT] prompt [EOT] PAD... [SOI] image [EOI]
// image_ids entries are image token ids or the MASK id.
TokenSequence assemble_t2i_sequence(std::span<const TokenId> prompt_ids,
                                    std::span<const TokenId> image_ids,
                                    const UnifiedVocab& vocab, int max_text_len,
                                    int image_len = kGridSide * kGridSide);

}  // namespace mtgrid
