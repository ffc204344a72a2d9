#include "mtgrid/common/language.hpp"

namespace mtgrid {
namespace {
constexpr std::array<std::string_view, kNumLanguages> kTags = {"en", "zh", "nl",
                                                               "fr", "hi", "fa"};
}  // namespace

std::string_view language_tag(Language language) {
  return kTags[static_cast<std::size_t>(language)];
}

std::optional<Language> parse_language(std::string_view tag) {
  for (std::size_t i = 0; i < kTags.size(); ++i) {
    if (kTags[i] == tag) return static_cast<Language>(i);
  }
  return std::nullopt;
}

bool joins_without_spaces(Language language) { return language == Language::zh; }

}  // namespace mtgrid
