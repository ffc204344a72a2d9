#include "mtgrid/evaluation/prompts.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"

namespace mtgrid::eval {

using scene::CaptionStyle;
using scene::Shape;

namespace {

Shape random_shape(Rng& rng) {
  return scene::kAllShapes[rng.below(scene::kNumShapes)];
}

PaletteIndex random_color(Rng& rng) {
  return static_cast<PaletteIndex>(scene::kFirstObjectColor + rng.below(scene::kNumObjectColors));
}

Shape other_shape(Rng& rng, Shape not_this) {
  Shape s = not_this;
  while (s == not_this) s = random_shape(rng);
  return s;
}

PaletteIndex other_color(Rng& rng, PaletteIndex not_this) {
  PaletteIndex c = not_this;
  while (c == not_this) c = random_color(rng);
  return c;
}

// Scene targets and the oracle constraint they realize.
struct PromptPlan {
  scene::SceneConstraints scene;
  EvalConstraint constraint;
  CaptionStyle style = CaptionStyle::detailed;
};

PromptPlan plan_prompt(Dimension d, Rng& rng) {
  PromptPlan p;
  p.constraint.dimension = d;
  const Shape a = random_shape(rng);
  const PaletteIndex ca = random_color(rng);
  switch (d) {
    case Dimension::single_object:
    case Dimension::colors:
      p.scene.count = 1;
      p.scene.objects = {{a, ca}};
      p.constraint.objects = {{a, ca, 1}};
      break;
    case Dimension::counting: {
      const int n = 2 + static_cast<int>(rng.below(3));
      p.scene.count = n;
      p.scene.identical = true;
      p.scene.objects = {{a, ca}};
      p.constraint.objects = {{a, ca, n}};
      break;
    }
    case Dimension::two_objects:
    case Dimension::color_attribute:
    case Dimension::position: {
      const Shape b = other_shape(rng, a);
      const PaletteIndex cb = other_color(rng, ca);
      p.scene.count = 2;
      p.scene.objects = {{a, ca}, {b, cb}};
      p.constraint.objects = {{a, ca, 1}, {b, cb, 1}};
      if (d == Dimension::position) {
        const auto rel = static_cast<scene::Relation>(rng.below(4));
        p.scene.relation = rel;
        p.constraint.relation = rel;
      } else {
        p.style = CaptionStyle::instruct;
      }
      break;
    }
  }
  return p;
}

std::string prompt_id_for(Dimension d, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%03d", index);
  return std::string(dimension_name(d)) + buf;
}

}  // namespace

std::vector<PromptRecord> make_prompt_set(std::uint64_t seed, int per_dimension,
                                          const scene::LexiconSet& lexicons) {
  if (per_dimension < 1) throw InvalidArgument("prompt set needs at least one prompt per dimension");
  std::vector<PromptRecord> out;
  for (Dimension d : kAllDimensions) {
    for (int i = 0; i < per_dimension; ++i) {
      Rng rng(mix_seed({seed, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)}));
      const PromptPlan plan = plan_prompt(d, rng);
      const scene::SceneSpec spec = scene::sample_scene(rng.next_u64(), plan.scene);
      PromptRecord rec;
      rec.prompt_id = prompt_id_for(d, i);
      rec.constraint = plan.constraint;
      rec.style = plan.style;
      rec.concepts = scene::caption_concepts(spec, plan.style, scene::scene_fingerprint(spec));
      for (Language lang : kAllLanguages) {
        rec.text[static_cast<std::size_t>(lang)] =
            scene::join_surfaces(lang, scene::render_concepts(rec.concepts, lexicons.at(lang)));
      }
      validate_constraint(rec.constraint);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

void save_prompt_set(const std::vector<PromptRecord>& prompts, const std::filesystem::path& path) {
  std::string body;
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["prompt_id"] = p.prompt_id;
    j["dimension"] = dimension_name(p.constraint.dimension);
    j["style"] = scene::style_name(p.style);
    j["constraint"] = nlohmann::ordered_json::parse(constraint_to_json(p.constraint).dump());
    j["concepts"] = p.concepts;
    nlohmann::ordered_json text;
    for (Language lang : kAllLanguages) text[std::string(language_tag(lang))] = p.text_in(lang);
    j["text"] = text;
    body += j.dump();
    body += '\n';
  }
  write_file_atomically(path, body);
}

std::vector<PromptRecord> load_prompt_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prompt set " + path.string());
  std::vector<PromptRecord> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      PromptRecord rec;
      rec.prompt_id = j.at("prompt_id").get<std::string>();
      if (!ids.insert(rec.prompt_id).second) {
        throw InvalidArgument("duplicate prompt_id '" + rec.prompt_id + "'");
      }
      rec.constraint = constraint_from_json(j.at("constraint"));
      if (j.contains("dimension") &&
          j.at("dimension").get<std::string>() != dimension_name(rec.constraint.dimension)) {
        throw InvalidArgument("dimension disagrees with its constraint");
      }
      const auto style_s = j.value("style", std::string("detailed"));
      const auto style = scene::parse_style(style_s);
      if (!style) throw InvalidArgument("unknown style '" + style_s + "'");
      rec.style = *style;
      rec.concepts = j.value("concepts", std::vector<std::string>{});
      const auto& text = j.at("text");
      for (Language lang : kAllLanguages) {
        const std::string tag(language_tag(lang));
        if (!text.contains(tag)) throw InvalidArgument("missing text for language " + tag);
        rec.text[static_cast<std::size_t>(lang)] = text.at(tag).get<std::string>();
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(where + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    }
  }
  return out;
}

std::string_view variant_name(CodeSwitchVariant variant) {
  return variant == CodeSwitchVariant::english_first ? "EF" : "ES";
}

std::vector<CodeSwitchPrompt> make_code_switch_prompts(const std::vector<std::string>& concepts,
                                                       const std::vector<Language>& targets,
                                                       const scene::LexiconSet& lexicons) {
  if (concepts.empty()) throw InvalidArgument("code-switch prompt of an empty concept sequence");
  const std::size_t split = (concepts.size() + 1) / 2;
  const std::vector<std::string> first(concepts.begin(), concepts.begin() + static_cast<std::ptrdiff_t>(split));
  const std::vector<std::string> second(concepts.begin() + static_cast<std::ptrdiff_t>(split), concepts.end());
  const auto& en = lexicons.at(Language::en);
  std::vector<CodeSwitchPrompt> out;
  for (Language target : targets) {
    if (target == Language::en) throw InvalidArgument("code-switch target must not be English");
    const auto& tl = lexicons.at(target);
    for (auto variant : {CodeSwitchVariant::english_first, CodeSwitchVariant::english_second}) {
      const bool ef = variant == CodeSwitchVariant::english_first;
      const auto head = scene::render_concepts(first, ef ? en : tl);
      const auto tail = scene::render_concepts(second, ef ? tl : en);
      CodeSwitchPrompt p;
      p.variant = variant;
      p.target = target;
      p.surfaces = head;
      p.surfaces.insert(p.surfaces.end(), tail.begin(), tail.end());
      p.text = scene::join_surfaces(ef ? Language::en : target, head);
      if (!tail.empty()) {
        p.text += ' ';
        p.text += scene::join_surfaces(ef ? target : Language::en, tail);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<std::string> english_concepts(std::string_view text, const UnifiedVocab& vocab,
                                          const scene::LexiconSet& lexicons) {
  const auto& en = lexicons.at(Language::en);
  std::vector<std::string> out;
  for (const auto& surface : vocab.segment(text)) {
    const auto c = en.concept_of(surface);
    if (!c) throw InvalidArgument("'" + surface + "' has no English concept");
    out.push_back(*c);
  }
  return out;
}

}  // namespace mtgrid::eval
