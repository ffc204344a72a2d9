#include "mtgrid/model/attention_mask.hpp"

namespace mtgrid {

AttentionMask build_attention_mask(const SequenceLayout& layout) {
  validate_layout(layout);
  AttentionMask mask(layout.total_len);
  const Span& text = layout.text_block;
  const Span& image = layout.image_block;
  for (int p = text.start; p < text.end; ++p) {
    for (int j = text.start; j <= p; ++j) mask.set(p, j, true);
  }
  for (int p = image.start; p < image.end; ++p) {
    for (int j = text.start; j < text.end; ++j) mask.set(p, j, true);
    for (int j = image.start; j < image.end; ++j) mask.set(p, j, true);
  }
  return mask;
}

}  // namespace mtgrid
