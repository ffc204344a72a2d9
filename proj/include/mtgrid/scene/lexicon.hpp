#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrid/common/language.hpp"
#include "mtgrid/scene/scene.hpp"

namespace mtgrid::scene {

// Joins surface forms with the language's word separator.
std::string join_surfaces(Language language, const std::vector<std::string>& surfaces);

// Concept ids are namespaced strings: color.*, shape.*, count.*, rel.*,
// tmpl.* (template words) and filler.* (concept-neutral distractors).
std::string concept_of_shape(Shape shape);
std::string concept_of_color(PaletteIndex color);
std::string concept_of_relation(Relation relation);
// Count words exist for 2..4; a single object uses the article tmpl.a.
std::string concept_of_count(int count);
std::optional<int> count_of_concept(std::string_view concept_id);

// Every concept id a complete lexicon must define, in canonical order.
const std::vector<std::string>& all_concepts();
const std::vector<std::string>& filler_concepts();
bool is_template_concept(std::string_view concept_id);

// Mapping from concept id to one surface form in one language.
class Lexicon {
 public:
  Lexicon(Language language, std::map<std::string, std::string> term_map);

  // Reads a UTF-8 TSV file of `concept_id <TAB> surface` lines.
  static Lexicon load(Language language, const std::filesystem::path& path);

  Language language() const { return language_; }
  const std::map<std::string, std::string>& term_map() const { return terms_; }

  // Throws InvalidArgument naming the concept when it is missing.
  const std::string& surface(std::string_view concept_id) const;
  std::optional<std::string> concept_of(std::string_view surface) const;
  bool contains_surface(std::string_view surface) const {
    return inverse_.count(std::string(surface)) > 0;
  }

 private:
  Language language_;
  std::map<std::string, std::string> terms_;
  std::map<std::string, std::string> inverse_;
};

// All six lexicons, indexed by Language.
class LexiconSet {
 public:
  explicit LexiconSet(std::vector<Lexicon> lexicons);
  // Loads `<dir>/<tag>.tsv` for every language.
  static LexiconSet load(const std::filesystem::path& dir);
  // Lexicons shipped in the repository's data directory.
  static const LexiconSet& builtin();

  const Lexicon& at(Language language) const {
    return lexicons_[static_cast<std::size_t>(language)];
  }
  // Union of surface forms: languages in kAllLanguages order, concepts in
  // all_concepts() order, first occurrence wins.
  std::vector<std::string> surface_table() const;

 private:
  std::vector<Lexicon> lexicons_;
};

std::filesystem::path default_data_dir();

}  // namespace mtgrid::scene
