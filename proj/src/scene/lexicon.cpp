#include "mtgrid/scene/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mtgrid/common/error.hpp"

#ifndef MTGRID_DATA_DIR
#define MTGRID_DATA_DIR "data"
#endif

namespace mtgrid::scene {
namespace {

std::vector<std::string> make_all_concepts() {
  std::vector<std::string> out;
  for (int c = kFirstObjectColor; c <= kLastObjectColor; ++c) {
    out.push_back(concept_of_color(static_cast<PaletteIndex>(c)));
  }
  for (Shape s : kAllShapes) out.push_back(concept_of_shape(s));
  for (int n = 2; n <= kMaxObjects; ++n) out.push_back(concept_of_count(n));
  for (int r = 0; r < 4; ++r) out.push_back(concept_of_relation(static_cast<Relation>(r)));
  for (const char* t : {"a", "photo", "of", "and", "draw", "image", "with"}) {
    out.push_back(std::string("tmpl.") + t);
  }
  for (const auto& f : filler_concepts()) out.push_back(f);
  return out;
}

}  // namespace

std::string join_surfaces(Language language, const std::vector<std::string>& surfaces) {
  const std::string_view sep = joins_without_spaces(language) ? "" : " ";
  std::string out;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (i > 0) out += sep;
    out += surfaces[i];
  }
  return out;
}

std::string concept_of_shape(Shape shape) {
  return "shape." + std::string(shape_name(shape));
}

std::string concept_of_color(PaletteIndex color) {
  return "color." + std::string(color_name(color));
}

std::string concept_of_relation(Relation relation) {
  return "rel." + std::string(relation_name(relation));
}

std::string concept_of_count(int count) {
  switch (count) {
    case 1: return "tmpl.a";
    case 2: return "count.two";
    case 3: return "count.three";
    case 4: return "count.four";
    default:
      throw InvalidArgument("no count word for " + std::to_string(count));
  }
}

std::optional<int> count_of_concept(std::string_view concept_id) {
  if (concept_id == "tmpl.a") return 1;
  if (concept_id == "count.two") return 2;
  if (concept_id == "count.three") return 3;
  if (concept_id == "count.four") return 4;
  return std::nullopt;
}

const std::vector<std::string>& all_concepts() {
  static const std::vector<std::string> concepts = make_all_concepts();
  return concepts;
}

const std::vector<std::string>& filler_concepts() {
  static const std::vector<std::string> fillers = {
      "filler.hd",       "filler.wallpaper", "filler.stock", "filler.free",
      "filler.download", "filler.beautiful", "filler.art",   "filler.new"};
  return fillers;
}

bool is_template_concept(std::string_view concept_id) {
  return concept_id.starts_with("tmpl.");
}

Lexicon::Lexicon(Language language, std::map<std::string, std::string> term_map)
    : language_(language), terms_(std::move(term_map)) {
  for (const auto& [concept_id, surface] : terms_) {
    if (surface.empty()) {
      throw InvalidArgument("lexicon " + std::string(language_tag(language_)) +
                            ": empty surface for " + concept_id);
    }
    if (!inverse_.emplace(surface, concept_id).second) {
      throw InvalidArgument("lexicon " + std::string(language_tag(language_)) +
                            ": surface '" + surface + "' is not unique");
    }
  }
}

Lexicon Lexicon::load(Language language, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  std::map<std::string, std::string> terms;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": missing tab");
    }
    std::string concept_id = line.substr(0, tab);
    if (!terms.emplace(concept_id, line.substr(tab + 1)).second) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": duplicate concept " + concept_id);
    }
  }
  return Lexicon(language, std::move(terms));
}

const std::string& Lexicon::surface(std::string_view concept_id) const {
  const auto it = terms_.find(std::string(concept_id));
  if (it == terms_.end()) {
    throw InvalidArgument("lexicon " + std::string(language_tag(language_)) +
                          " has no entry for concept " + std::string(concept_id));
  }
  return it->second;
}

std::optional<std::string> Lexicon::concept_of(std::string_view surface) const {
  const auto it = inverse_.find(std::string(surface));
  if (it == inverse_.end()) return std::nullopt;
  return it->second;
}

LexiconSet::LexiconSet(std::vector<Lexicon> lexicons) : lexicons_(std::move(lexicons)) {
  if (lexicons_.size() != kAllLanguages.size()) {
    throw InvalidArgument("lexicon set needs one lexicon per language");
  }
  for (std::size_t i = 0; i < lexicons_.size(); ++i) {
    if (lexicons_[i].language() != kAllLanguages[i]) {
      throw InvalidArgument("lexicon set is not in canonical language order");
    }
    for (const auto& concept_id : all_concepts()) lexicons_[i].surface(concept_id);
  }
}

LexiconSet LexiconSet::load(const std::filesystem::path& dir) {
  std::vector<Lexicon> lexicons;
  for (Language lang : kAllLanguages) {
    lexicons.push_back(
        Lexicon::load(lang, dir / (std::string(language_tag(lang)) + ".tsv")));
  }
  return LexiconSet(std::move(lexicons));
}

const LexiconSet& LexiconSet::builtin() {
  static const LexiconSet set = LexiconSet::load(default_data_dir() / "lexicons");
  return set;
}

std::vector<std::string> LexiconSet::surface_table() const {
  std::vector<std::string> table;
  std::set<std::string> seen;
  for (const Lexicon& lex : lexicons_) {
    for (const auto& concept_id : all_concepts()) {
      const std::string& s = lex.surface(concept_id);
      if (seen.insert(s).second) table.push_back(s);
    }
  }
  return table;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("MTGRID_DATA_DIR")) return env;
  return MTGRID_DATA_DIR;
}

}  // namespace mtgrid::scene
