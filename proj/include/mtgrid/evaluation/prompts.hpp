#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtgrid/evaluation/oracle.hpp"
#include "mtgrid/scene/caption.hpp"
#include "mtgrid/scene/lexicon.hpp"
#include "mtgrid/tokenizer/vocab.hpp"

namespace mtgrid::eval {

// One evaluation prompt with its rendering in every language.
struct PromptRecord {
  std::string prompt_id;
  EvalConstraint constraint;
  scene::CaptionStyle style = scene::CaptionStyle::detailed;
  std::vector<std::string> concepts;
  std::array<std::string, kNumLanguages> text;  // indexed by Language

  const std::string& text_in(Language language) const {
    return text[static_cast<std::size_t>(language)];
  }
};

// per_dimension prompts for each of the six dimensions. Each prompt is
// captioned from a scene sampled to satisfy its constraint, so the prompt
// and the oracle agree by construction. Object prompts use the detailed
// style; two_objects and color_attribute use the instruct style.
std::vector<PromptRecord> make_prompt_set(std::uint64_t seed, int per_dimension,
                                          const scene::LexiconSet& lexicons);

// JSONL, one object per line:
//   {"prompt_id", "dimension", "style", "constraint", "concepts", "text": {tag: text}}
void save_prompt_set(const std::vector<PromptRecord>& prompts, const std::filesystem::path& path);
// Throws IoError on unreadable files and InvalidArgument on malformed
// records, unknown concepts, duplicate ids or missing languages.
std::vector<PromptRecord> load_prompt_set(const std::filesystem::path& path);

enum class CodeSwitchVariant { english_first, english_second };
std::string_view variant_name(CodeSwitchVariant variant);  // "EF" / "ES"

struct CodeSwitchPrompt {
  CodeSwitchVariant variant = CodeSwitchVariant::english_first;
  Language target = Language::zh;
  std::vector<std::string> surfaces;  // surface form per concept
  std::string text;                   // halves joined with a space
};

// The concept sequence is split at ceil(n / 2). English-first keeps the
// first half in English and renders the second half in the target language;
// English-second does the reverse. Returns EF then ES for each target in
// order. English targets are rejected. Throws InvalidArgument naming a
// concept missing from a lexicon.
std::vector<CodeSwitchPrompt> make_code_switch_prompts(const std::vector<std::string>& concepts,
                                                       const std::vector<Language>& targets,
                                                       const scene::LexiconSet& lexicons);

// Concept sequence of an English prompt, segmented with the vocabulary.
// Throws InvalidArgument on a surface form with no English concept.
std::vector<std::string> english_concepts(std::string_view text, const UnifiedVocab& vocab,
                                          const scene::LexiconSet& lexicons);

}  // namespace mtgrid::eval
