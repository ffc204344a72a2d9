#include "mtgrid/tokenizer/sequence.hpp"

#include <string>

#include "mtgrid/common/error.hpp"

namespace mtgrid {

SequenceLayout bare_layout(int text_len, int image_len) {
  SequenceLayout layout;
  layout.text_span = {0, text_len};
  layout.image_span = {text_len, text_len + image_len};
  layout.text_block = layout.text_span;
  layout.image_block = layout.image_span;
  layout.total_len = text_len + image_len;
  return layout;
}

void validate_layout(const SequenceLayout& l) {
  auto ok_span = [](const Span& s) { return s.start >= 0 && s.end >= s.start; };
  if (!ok_span(l.text_span) || !ok_span(l.image_span) || !ok_span(l.text_block) ||
      !ok_span(l.image_block)) {
    throw InvalidArgument("layout: malformed span");
  }
  auto inside = [](const Span& inner, const Span& outer) {
    return inner.size() == 0 || (inner.start >= outer.start && inner.end <= outer.end);
  };
  if (!inside(l.text_span, l.text_block) || !inside(l.image_span, l.image_block)) {
    throw InvalidArgument("layout: span outside its block");
  }
  if (l.text_block.end > l.image_block.start && l.text_block.size() > 0 &&
      l.image_block.size() > 0) {
    throw InvalidArgument("layout: text block must precede the image block");
  }
  if (l.text_block.end > l.total_len || l.image_block.end > l.total_len) {
    throw InvalidArgument("layout: block exceeds total length");
  }
}

TokenSequence assemble_t2i_sequence(std::span<const TokenId> prompt_ids,
                                    std::span<const TokenId> image_ids,
                                    const UnifiedVocab& vocab, int max_text_len,
                                    int image_len) {
  const int n = static_cast<int>(prompt_ids.size());
  if (n > max_text_len) {
    throw InvalidArgument("prompt too long: " + std::to_string(n) + " tokens > " +
                          std::to_string(max_text_len));
  }
  if (static_cast<int>(image_ids.size()) != image_len) {
    throw InvalidArgument("wrong image length: " + std::to_string(image_ids.size()) +
                          " != " + std::to_string(image_len));
  }
  for (TokenId id : prompt_ids) {
    if (!vocab.is_text(id)) {
      throw InvalidArgument("prompt contains non-text token " + std::to_string(id));
    }
  }
  for (TokenId id : image_ids) {
    if (!vocab.is_image(id) && id != special_id(Special::mask)) {
      throw InvalidArgument("image part contains token " + std::to_string(id) +
                            " that is neither an image token nor MASK");
    }
  }

  TokenSequence seq;
  const int total = t2i_sequence_length(max_text_len, image_len);
  seq.ids.assign(static_cast<std::size_t>(total), special_id(Special::pad));
  seq.ids[0] = special_id(Special::t2i);
  seq.ids[1] = special_id(Special::sot);
  for (int i = 0; i < n; ++i) seq.ids[static_cast<std::size_t>(2 + i)] = prompt_ids[static_cast<std::size_t>(i)];
  seq.ids[static_cast<std::size_t>(2 + n)] = special_id(Special::eot);
  const int soi = 3 + max_text_len;
  seq.ids[static_cast<std::size_t>(soi)] = special_id(Special::soi);
  for (int i = 0; i < image_len; ++i) {
    seq.ids[static_cast<std::size_t>(soi + 1 + i)] = image_ids[static_cast<std::size_t>(i)];
  }
  seq.ids[static_cast<std::size_t>(soi + 1 + image_len)] = special_id(Special::eoi);

  SequenceLayout& l = seq.layout;
  l.text_span = {2, 2 + n};
  l.text_block = {0, 3 + n};
  l.image_span = {soi + 1, soi + 1 + image_len};
  l.image_block = {soi, soi + 2 + image_len};
  l.total_len = total;
  return seq;
}

}  // namespace mtgrid
