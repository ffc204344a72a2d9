#include "mtgrid/scene/filters.hpp"

#include <optional>

#include "mtgrid/common/error.hpp"

namespace mtgrid::scene {
namespace {

struct Mention {
  Shape shape;
  PaletteIndex color;
  std::optional<int> count;
};

// Parses (count? color shape) mentions. Returns nullopt when a color or shape
// appears without its partner.
std::optional<std::vector<Mention>> parse_mentions(std::span<const std::string> tokens,
                                                   const Lexicon& lexicon) {
  std::vector<Mention> mentions;
  std::optional<int> pending_count;
  std::optional<PaletteIndex> pending_color;
  for (const auto& token : tokens) {
    const auto concept_id = lexicon.concept_of(token);
    if (!concept_id) continue;
    const std::string_view c = *concept_id;
    if (auto n = count_of_concept(c)) {
      if (pending_color) return std::nullopt;
      pending_count = n;
    } else if (c.starts_with("color.")) {
      if (pending_color) return std::nullopt;
      pending_color = parse_color(c.substr(6));
    } else if (c.starts_with("shape.")) {
      if (!pending_color) return std::nullopt;
      mentions.push_back({*parse_shape(c.substr(6)), *pending_color, pending_count});
      pending_color.reset();
      pending_count.reset();
    }
  }
  if (pending_color) return std::nullopt;
  return mentions;
}

}  // namespace

bool length_filter(std::size_t token_count) {
  return token_count >= kMinCaptionTokens && token_count <= kMaxCaptionTokens;
}

LanguageCheck language_validate(std::span<const std::string> tokens,
                                const Lexicon& lexicon) {
  if (tokens.empty()) throw InvalidArgument("language_validate: empty caption");
  std::size_t considered = 0;
  std::size_t found = 0;
  for (const auto& token : tokens) {
    const auto concept_id = lexicon.concept_of(token);
    if (concept_id && is_template_concept(*concept_id)) continue;
    ++considered;
    if (concept_id) ++found;
  }
  LanguageCheck check;
  check.confidence =
      considered == 0 ? 1.0 : static_cast<double>(found) / static_cast<double>(considered);
  check.keep = check.confidence > kLanguageConfidenceThreshold;
  return check;
}

bool mismatch_filter(const SceneSpec& scene, std::span<const std::string> tokens,
                     const Lexicon& lexicon, CaptionStyle style) {
  const auto mentions = parse_mentions(tokens, lexicon);
  if (!mentions) return false;
  const auto groups = group_objects(scene);
  std::vector<bool> mentioned(groups.size(), false);
  for (const Mention& m : *mentions) {
    bool matched = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].shape == m.shape && groups[g].color == m.color &&
          (!m.count || *m.count == groups[g].count)) {
        matched = true;
        mentioned[g] = true;
      }
    }
    if (!matched) return false;
  }
  if (style == CaptionStyle::detailed || style == CaptionStyle::instruct) {
    for (bool m : mentioned) {
      if (!m) return false;
    }
  }
  return true;
}

bool safety_filter(std::span<const std::string> /*tokens*/) { return true; }

std::size_t FilterReport::rejected() const {
  std::size_t n = 0;
  for (const auto& [name, count] : rejected_by) n += count;
  return n;
}

FilterDecision apply_filters(const SceneSpec& scene, std::span<const std::string> tokens,
                             const Lexicon& lexicon, CaptionStyle style) {
  // Class-label records are single names by nature; the length bounds apply
  // to sentence-style captions only.
  if (style != CaptionStyle::label && !length_filter(tokens.size())) {
    return {false, "length"};
  }
  if (tokens.empty() || !language_validate(tokens, lexicon).keep) {
    return {false, "language"};
  }
  if (!mismatch_filter(scene, tokens, lexicon, style)) return {false, "mismatch"};
  if (!safety_filter(tokens)) return {false, "safety"};
  return {};
}

}  // namespace mtgrid::scene
