#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/scene/caption.hpp"
#include "mtgrid/tokenizer/sequence.hpp"

using namespace mtgrid;
using namespace mtgrid::testing;

TEST_CASE("special tokens occupy the first eight ids in order") {
  CHECK(special_id(Special::pad) == 0);
  CHECK(special_id(Special::t2i) == 1);
  CHECK(special_id(Special::sot) == 2);
  CHECK(special_id(Special::eot) == 3);
  CHECK(special_id(Special::soi) == 4);
  CHECK(special_id(Special::eoi) == 5);
  CHECK(special_id(Special::mask) == 6);
  CHECK(special_id(Special::null) == 7);
}

TEST_CASE("id ranges partition the unified vocabulary") {
  const UnifiedVocab v = tiny_vocab();
  CHECK(v.text_size() == 6);
  CHECK(v.image_offset() == 14);
  CHECK(v.size() == 14 + kCodebookSize);
  CHECK(v.kind(0) == TokenKind::special);
  CHECK(v.kind(7) == TokenKind::special);
  CHECK(v.kind(8) == TokenKind::text);
  CHECK(v.kind(13) == TokenKind::text);
  CHECK(v.kind(14) == TokenKind::image);
  CHECK(v.kind(v.size() - 1) == TokenKind::image);
  CHECK_THROWS_AS(v.kind(v.size()), InvalidArgument);
  CHECK_THROWS_AS(v.kind(-1), InvalidArgument);
}

TEST_CASE("image ids map palette indices exactly") {
  const UnifiedVocab v = tiny_vocab();
  CHECK(v.image_id(0) == v.image_offset());
  CHECK(v.image_id(kCodebookSize - 1) == v.image_offset() + kCodebookSize - 1);
  for (int p = 0; p < kCodebookSize; ++p) {
    CHECK(v.palette_of(v.image_id(static_cast<PaletteIndex>(p))) == p);
  }
  CHECK_THROWS_AS(v.image_id(kCodebookSize), InvalidArgument);
  CHECK_THROWS_AS(v.palette_of(8), InvalidArgument);
  CHECK_THROWS_AS(v.palette_of(special_id(Special::mask)), InvalidArgument);
}

TEST_CASE("vocabulary rejects duplicates and malformed forms") {
  CHECK_THROWS_AS(UnifiedVocab({"a", "a"}), InvalidArgument);
  CHECK_THROWS_AS(UnifiedVocab({""}), InvalidArgument);
  CHECK_THROWS_AS(UnifiedVocab({" a"}), InvalidArgument);
}

TEST_CASE("vocabulary file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "mtgrid_vocab_test.txt";
  const UnifiedVocab v = tiny_vocab();
  v.save(path);
  const UnifiedVocab back = UnifiedVocab::load(path);
  CHECK(back.text_vocab() == v.text_vocab());
  CHECK(back.image_offset() == v.image_offset());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(UnifiedVocab::load(path), IoError);
}

TEST_CASE("segmentation prefers the longest surface form at a word boundary") {
  const UnifiedVocab v({"red", "red square", "square", "re", "一个", "红色", "正方形"});
  CHECK(v.segment("red square") == std::vector<std::string>{"red square"});
  CHECK(v.segment("square red") == std::vector<std::string>{"square", "red"});
  CHECK(v.segment("  red   ") == std::vector<std::string>{"red"});
  CHECK(v.segment("一个红色正方形") == std::vector<std::string>{"一个", "红色", "正方形"});
  CHECK(v.segment("red 红色") == std::vector<std::string>{"red", "红色"});
  CHECK(v.segment("").empty());
  // "re" matches the start of "reds" but does not end at a word boundary.
  CHECK_THROWS_AS(v.segment("reds"), InvalidArgument);
}

TEST_CASE("encode and decode round trip every lexicon caption") {
  const auto& lex = scene::LexiconSet::builtin();
  const UnifiedVocab vocab(lex.surface_table());
  for (Language lang : kAllLanguages) {
    const std::vector<std::string> concepts = {"tmpl.a", "tmpl.photo", "tmpl.of", "count.three",
                                               "color.red", "shape.square"};
    const std::string text = scene::join_surfaces(lang, scene::render_concepts(concepts, lex.at(lang)));
    const auto ids = encode_text(text, vocab, lang);
    CHECK(ids.size() == concepts.size());
    CHECK(decode_text(ids, vocab, lang) == text);
  }
}

TEST_CASE("grid ids round trip") {
  const UnifiedVocab v = tiny_vocab();
  TokenGrid g;
  for (std::size_t i = 0; i < g.tokens.size(); ++i) g.tokens[i] = static_cast<PaletteIndex>(i % kCodebookSize);
  const auto ids = grid_to_ids(g, v);
  CHECK(ids.size() == 256);
  CHECK(ids_to_grid(ids, v) == g);
  auto bad = ids;
  bad[3] = special_id(Special::mask);
  CHECK_THROWS_AS(ids_to_grid(bad, v), InvalidArgument);
  TokenGrid invalid;
  invalid.tokens[0] = kCodebookSize;
  CHECK_THROWS_AS(validate_grid(invalid), InvalidArgument);
}

TEST_CASE("assembled sequence follows the text-to-image template") {
  const UnifiedVocab v = tiny_vocab();
  const std::vector<TokenId> prompt{8, 9, 10};
  const std::vector<TokenId> image(kTinyImageLen, v.image_id(2));
  const auto seq = assemble_t2i_sequence(prompt, image, v, kTinyPromptLen, kTinyImageLen);
  const int total = t2i_sequence_length(kTinyPromptLen, kTinyImageLen);
  CHECK(total == 5 + 4 + 16);
  CHECK(static_cast<int>(seq.ids.size()) == total);
  CHECK(seq.layout.total_len == total);
  const std::vector<TokenId> head(seq.ids.begin(), seq.ids.begin() + 8);
  CHECK(head == std::vector<TokenId>{1, 2, 8, 9, 10, 3, 0, 4});
  CHECK(seq.ids.back() == special_id(Special::eoi));
  CHECK(seq.layout.text_span == Span{2, 5});
  CHECK(seq.layout.text_block == Span{0, 6});
  CHECK(seq.layout.image_span == Span{8, 24});
  CHECK(seq.layout.image_block == Span{7, 25});
  CHECK(seq.layout.is_padding(6));
  CHECK_FALSE(seq.layout.is_padding(5));
  CHECK_NOTHROW(validate_layout(seq.layout));

  // The full-size sequence has 293 positions.
  CHECK(t2i_sequence_length(32, 256) == 293);
}

TEST_CASE("empty prompt and full prompt layouts") {
  const UnifiedVocab v = tiny_vocab();
  const std::vector<TokenId> image(kTinyImageLen, special_id(Special::mask));
  const auto empty = assemble_t2i_sequence({}, image, v, kTinyPromptLen, kTinyImageLen);
  CHECK(empty.layout.text_span.size() == 0);
  CHECK(empty.ids[2] == special_id(Special::eot));
  const std::vector<TokenId> full{8, 9, 10, 11};
  const auto f = assemble_t2i_sequence(full, image, v, kTinyPromptLen, kTinyImageLen);
  for (int p = 0; p < f.layout.total_len; ++p) CHECK_FALSE(f.layout.is_padding(p));
}

TEST_CASE("assembly rejects malformed input") {
  const UnifiedVocab v = tiny_vocab();
  const std::vector<TokenId> image(kTinyImageLen, v.image_id(0));
  CHECK_THROWS_AS(assemble_t2i_sequence(std::vector<TokenId>{8, 8, 8, 8, 8}, image, v, kTinyPromptLen,
                                        kTinyImageLen),
                  InvalidArgument);
  CHECK_THROWS_AS(assemble_t2i_sequence(std::vector<TokenId>{v.image_id(0)}, image, v,
                                        kTinyPromptLen, kTinyImageLen),
                  InvalidArgument);
  CHECK_THROWS_AS(assemble_t2i_sequence({}, std::vector<TokenId>(3, v.image_id(0)), v,
                                        kTinyPromptLen, kTinyImageLen),
                  InvalidArgument);
  auto bad = image;
  bad[0] = 8;
  CHECK_THROWS_AS(assemble_t2i_sequence({}, bad, v, kTinyPromptLen, kTinyImageLen), InvalidArgument);
}

TEST_CASE("layout validation") {
  SequenceLayout l = bare_layout(3, 4);
  CHECK_NOTHROW(validate_layout(l));
  l.total_len = 5;
  CHECK_THROWS_AS(validate_layout(l), InvalidArgument);
  l = bare_layout(3, 4);
  l.image_block = {1, 7};
  CHECK_THROWS_AS(validate_layout(l), InvalidArgument);
}
