#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mtgrid {

enum class Language : std::uint8_t { en, zh, nl, fr, hi, fa };
inline constexpr int kNumLanguages = 6;
inline constexpr std::array<Language, kNumLanguages> kAllLanguages = {
    Language::en, Language::zh, Language::nl,
    Language::fr, Language::hi, Language::fa};

std::string_view language_tag(Language language);
std::optional<Language> parse_language(std::string_view tag);
// Languages written without spaces between words.
bool joins_without_spaces(Language language);

}  // namespace mtgrid
