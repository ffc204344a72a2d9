#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "mtgrid/scene/caption.hpp"
#include "mtgrid/scene/lexicon.hpp"
#include "mtgrid/scene/scene.hpp"

namespace mtgrid::scene {

inline constexpr std::size_t kMinCaptionTokens = 5;
inline constexpr std::size_t kMaxCaptionTokens = 500;
inline constexpr double kLanguageConfidenceThreshold = 0.9;

// Keep iff 5 <= token_count <= 500.
bool length_filter(std::size_t token_count);

struct LanguageCheck {
  bool keep = false;
  double confidence = 0.0;
};

// Confidence is the fraction of tokens, excluding the language's template
// words, that belong to the lexicon; kept when strictly above 0.9. A caption
// made only of template words has confidence 1. Throws on an empty caption.
LanguageCheck language_validate(std::span<const std::string> tokens,
                                const Lexicon& lexicon);

// Every (color, shape) mention must exist in the scene, with a matching
// count when one is stated. For detailed and instruct captions every object
// group of the scene must also be mentioned. Filler, relation and unknown
// tokens are concept-neutral.
bool mismatch_filter(const SceneSpec& scene, std::span<const std::string> tokens,
                     const Lexicon& lexicon, CaptionStyle style);

// Content-safety screen. Procedural scenes are safe by construction, so this
// always keeps; it exists so the pipeline has the same stages as a real one.
bool safety_filter(std::span<const std::string> tokens);

struct FilterReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> rejected_by;

  std::size_t rejected() const;
};

// Result of running every filter in order length -> language -> mismatch ->
// safety. `rejected_by` names the first filter that failed.
struct FilterDecision {
  bool keep = true;
  std::string rejected_by;
};

FilterDecision apply_filters(const SceneSpec& scene, std::span<const std::string> tokens,
                             const Lexicon& lexicon, CaptionStyle style);

}  // namespace mtgrid::scene
