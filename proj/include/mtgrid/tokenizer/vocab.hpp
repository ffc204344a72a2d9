#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtgrid/common/language.hpp"
#include "mtgrid/tokenizer/token_grid.hpp"

namespace mtgrid {

using TokenId = std::int32_t;

// Special tokens occupy ids [0, 8) in this order.
enum class Special : TokenId { pad = 0, t2i, sot, eot, soi, eoi, mask, null };
inline constexpr TokenId kNumSpecials = 8;

inline constexpr TokenId special_id(Special s) { return static_cast<TokenId>(s); }

enum class TokenKind { special, text, image };

// Single id space over special, text and image tokens:
//   specials [0, 8), text [8, 8 + |text|), image [image_offset, image_offset + K).
class UnifiedVocab {
 public:
  explicit UnifiedVocab(std::vector<std::string> text_vocab,
                        int codebook_size = kCodebookSize);

  // Vocabulary file: one surface form per line, line number = id - 8.
  static UnifiedVocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int size() const { return image_offset_ + codebook_size_; }
  int text_size() const { return static_cast<int>(text_.size()); }
  TokenId image_offset() const { return image_offset_; }
  int codebook_size() const { return codebook_size_; }
  const std::vector<std::string>& text_vocab() const { return text_; }

  TokenKind kind(TokenId id) const;
  bool is_text(TokenId id) const { return id >= kNumSpecials && id < image_offset_; }
  bool is_image(TokenId id) const { return id >= image_offset_ && id < size(); }

  TokenId text_id(std::string_view surface) const;  // throws when absent
  const std::string& surface(TokenId id) const;     // text ids only

  TokenId image_id(PaletteIndex palette) const;
  PaletteIndex palette_of(TokenId id) const;  // throws outside the image range

  // Greedy longest-match segmentation of UTF-8 text into surface forms.
  // Matches may span spaces (multi-word forms) and must end at a word
  // boundary unless either side of the boundary is a CJK character.
  std::vector<std::string> segment(std::string_view text) const;

 private:
  std::vector<std::string> text_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId image_offset_ = kNumSpecials;
  int codebook_size_ = kCodebookSize;
};

std::vector<TokenId> encode_text(std::string_view text, const UnifiedVocab& vocab,
                                 Language language);
std::string decode_text(std::span<const TokenId> ids, const UnifiedVocab& vocab,
                        Language language);

std::vector<TokenId> grid_to_ids(const TokenGrid& grid, const UnifiedVocab& vocab);
TokenGrid ids_to_grid(std::span<const TokenId> ids, const UnifiedVocab& vocab);

}  // namespace mtgrid
