#include "mtgrid/tokenizer/vocab.hpp"

#include <cmath>
#include <fstream>

#include "mtgrid/common/error.hpp"

namespace mtgrid {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Decodes the code point starting at byte offset i; returns 0 at end of text.
char32_t code_point_at(std::string_view s, std::size_t i) {
  if (i >= s.size()) return 0;
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> char32_t {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) & 0x3F : 0;
  };
  if (b0 < 0x80) return b0;
  if ((b0 >> 5) == 0x6) return ((b0 & 0x1F) << 6) | cont(1);
  if ((b0 >> 4) == 0xE) return ((b0 & 0x0F) << 12) | (cont(1) << 6) | cont(2);
  return ((b0 & 0x07) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
}

// Offset of the first byte of the code point that ends just before byte `end`.
std::size_t last_code_point_start(std::string_view s, std::size_t end) {
  std::size_t i = end - 1;
  while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
  return i;
}

bool is_cjk(char32_t c) {
  return (c >= 0x2E80 && c <= 0x9FFF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0xFF00 && c <= 0xFFEF);
}

}  // namespace

UnifiedVocab::UnifiedVocab(std::vector<std::string> text_vocab, int codebook_size)
    : text_(std::move(text_vocab)), codebook_size_(codebook_size) {
  if (codebook_size_ <= 0) throw InvalidArgument("codebook size must be positive");
  for (std::size_t i = 0; i < text_.size(); ++i) {
    const std::string& s = text_[i];
    if (s.empty() || is_space(s.front()) || is_space(s.back()) ||
        s.find('\n') != std::string::npos) {
      throw InvalidArgument("invalid vocabulary surface form at line " +
                            std::to_string(i + 1));
    }
    if (!index_.emplace(s, kNumSpecials + static_cast<TokenId>(i)).second) {
      throw InvalidArgument("duplicate vocabulary surface form '" + s + "'");
    }
  }
  image_offset_ = kNumSpecials + static_cast<TokenId>(text_.size());
}

UnifiedVocab UnifiedVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return UnifiedVocab(std::move(lines));
}

void UnifiedVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& s : text_) out << s << '\n';
  if (!out) throw IoError("failed writing vocabulary " + path.string());
}

TokenKind UnifiedVocab::kind(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw InvalidArgument("token id " + std::to_string(id) + " outside the vocabulary");
  }
  if (id < kNumSpecials) return TokenKind::special;
  if (id < image_offset_) return TokenKind::text;
  return TokenKind::image;
}

TokenId UnifiedVocab::text_id(std::string_view surface) const {
  const auto it = index_.find(std::string(surface));
  if (it == index_.end()) {
    throw InvalidArgument("out-of-vocabulary token '" + std::string(surface) + "'");
  }
  return it->second;
}

const std::string& UnifiedVocab::surface(TokenId id) const {
  if (!is_text(id)) {
    throw InvalidArgument("token id " + std::to_string(id) + " is not a text token");
  }
  return text_[static_cast<std::size_t>(id - kNumSpecials)];
}

TokenId UnifiedVocab::image_id(PaletteIndex palette) const {
  if (palette >= codebook_size_) {
    throw InvalidArgument("palette index " + std::to_string(palette) +
                          " outside the codebook");
  }
  return image_offset_ + palette;
}

PaletteIndex UnifiedVocab::palette_of(TokenId id) const {
  if (!is_image(id)) {
    throw InvalidArgument("token id " + std::to_string(id) +
                          " is outside the image token range");
  }
  return static_cast<PaletteIndex>(id - image_offset_);
}

std::vector<std::string> UnifiedVocab::segment(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t best = 0;
    for (const auto& s : text_) {
      if (s.size() <= best || text.compare(i, s.size(), s) != 0) continue;
      const std::size_t end = i + s.size();
      const bool boundary =
          end == text.size() || is_space(text[end]) ||
          is_cjk(code_point_at(text, end)) ||
          is_cjk(code_point_at(text, last_code_point_start(text, end)));
      if (boundary) best = s.size();
    }
    if (best == 0) {
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      throw InvalidArgument("out-of-vocabulary token '" +
                            std::string(text.substr(i, j - i)) + "'");
    }
    out.emplace_back(text.substr(i, best));
    i += best;
  }
  return out;
}

std::vector<TokenId> encode_text(std::string_view text, const UnifiedVocab& vocab,
                                 Language /*language*/) {
  std::vector<TokenId> ids;
  for (const auto& s : vocab.segment(text)) ids.push_back(vocab.text_id(s));
  return ids;
}

std::string decode_text(std::span<const TokenId> ids, const UnifiedVocab& vocab,
                        Language language) {
  const std::string_view sep = joins_without_spaces(language) ? "" : " ";
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += sep;
    out += vocab.surface(ids[i]);
  }
  return out;
}

std::vector<TokenId> grid_to_ids(const TokenGrid& grid, const UnifiedVocab& vocab) {
  validate_grid(grid);
  std::vector<TokenId> ids;
  ids.reserve(grid.tokens.size());
  for (PaletteIndex p : grid.tokens) ids.push_back(vocab.image_id(p));
  return ids;
}

TokenGrid ids_to_grid(std::span<const TokenId> ids, const UnifiedVocab& vocab) {
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ids.size()))));
  if (static_cast<std::size_t>(side * side) != ids.size()) {
    throw InvalidArgument("image id count " + std::to_string(ids.size()) +
                          " is not a square");
  }
  TokenGrid grid(side, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) grid.tokens[i] = vocab.palette_of(ids[i]);
  return grid;
}

}  // namespace mtgrid
