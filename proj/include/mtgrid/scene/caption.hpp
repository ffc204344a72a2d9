#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrid/scene/lexicon.hpp"
#include "mtgrid/scene/scene.hpp"

namespace mtgrid::scene {

// label: object names only; noisy: names plus 1-3 filler tokens;
// detailed: "a photo of" + every object with count, color, shape and the
// relation between neighbours; instruct: "draw image with" + objects joined
// by "and".
enum class CaptionStyle : std::uint8_t { label, noisy, detailed, instruct };
inline constexpr int kNumStyles = 4;

std::string_view style_name(CaptionStyle style);
std::optional<CaptionStyle> parse_style(std::string_view name);

struct CaptionRecord {
  std::string scene_id;
  Language language = Language::en;
  std::string text;
  CaptionStyle style = CaptionStyle::label;
  // Language-independent concept sequence the text was rendered from.
  std::vector<std::string> concepts;
};

// Stable fingerprint of the scene's content; seeds the noisy-style fillers
// so every language receives the same concept sequence.
std::uint64_t scene_fingerprint(const SceneSpec& scene);

std::vector<std::string> caption_concepts(const SceneSpec& scene, CaptionStyle style,
                                          std::uint64_t noise_seed);

// Surface forms for a concept sequence; throws naming the missing concept.
std::vector<std::string> render_concepts(const std::vector<std::string>& concepts,
                                         const Lexicon& lexicon);

CaptionRecord caption_scene(const SceneSpec& scene, Language language,
                            const Lexicon& lexicon, CaptionStyle style,
                            std::string scene_id = {});

}  // namespace mtgrid::scene
