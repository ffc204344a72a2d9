#pragma once

#include <cstdint>
#include <vector>

#include "mtgrid/tokenizer/sequence.hpp"

namespace mtgrid {

// Square boolean matrix; allowed(p, j) means position p may attend to j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(int size)
      : size_(size), allowed_(static_cast<std::size_t>(size) * size, 0) {}

  int size() const { return size_; }
  bool allowed(int p, int j) const {
    return allowed_[static_cast<std::size_t>(p) * size_ + j] != 0;
  }
  void set(int p, int j, bool value) {
    allowed_[static_cast<std::size_t>(p) * size_ + j] = value ? 1 : 0;
  }
  // A position takes part in the computation iff it may attend to itself.
  bool active(int p) const { return allowed(p, p); }

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  int size_ = 0;
  std::vector<std::uint8_t> allowed_;
};

// Text-block positions attend causally within the text block and never to the
// image block. Image-block positions attend to the whole text block and the
// whole image block. Padding neither attends nor is attended.
AttentionMask build_attention_mask(const SequenceLayout& layout);

}  // namespace mtgrid
