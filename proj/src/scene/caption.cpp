#include "mtgrid/scene/caption.hpp"

#include <array>

#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"

namespace mtgrid::scene {
namespace {

constexpr std::array<std::string_view, kNumStyles> kStyleNames = {
    "label", "noisy", "detailed", "instruct"};

std::vector<std::string> object_phrase(const ObjectGroup& g, bool with_count) {
  std::vector<std::string> out;
  if (with_count) out.push_back(concept_of_count(g.count));
  out.push_back(concept_of_color(g.color));
  out.push_back(concept_of_shape(g.shape));
  return out;
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

std::string_view style_name(CaptionStyle style) {
  return kStyleNames[static_cast<std::size_t>(style)];
}

std::optional<CaptionStyle> parse_style(std::string_view name) {
  for (std::size_t i = 0; i < kStyleNames.size(); ++i) {
    if (kStyleNames[i] == name) return static_cast<CaptionStyle>(i);
  }
  return std::nullopt;
}

std::uint64_t scene_fingerprint(const SceneSpec& scene) {
  std::uint64_t h = mix_seed({static_cast<std::uint64_t>(scene.grid_size),
                              scene.background_color});
  for (const SceneObject& o : scene.objects) {
    h = mix_seed({h, static_cast<std::uint64_t>(o.shape), o.color,
                  static_cast<std::uint64_t>(o.anchor.row),
                  static_cast<std::uint64_t>(o.anchor.col),
                  static_cast<std::uint64_t>(o.size)});
  }
  return h;
}

std::vector<std::string> caption_concepts(const SceneSpec& scene, CaptionStyle style,
                                          std::uint64_t noise_seed) {
  const auto groups = group_objects(scene);
  std::vector<std::string> out;
  switch (style) {
    case CaptionStyle::label:
      for (const auto& g : groups) append(out, object_phrase(g, false));
      break;
    case CaptionStyle::noisy: {
      // Fillers go between object phrases, never inside one.
      std::vector<std::vector<std::string>> slots(groups.size() + 1);
      Rng rng(mix_seed({noise_seed, 0xf111e5}));
      const auto n_fillers = 1 + rng.below(3);
      for (std::uint64_t k = 0; k < n_fillers; ++k) {
        const auto slot = rng.below(slots.size());
        slots[slot].push_back(filler_concepts()[rng.below(filler_concepts().size())]);
      }
      for (std::size_t i = 0; i < groups.size(); ++i) {
        append(out, slots[i]);
        append(out, object_phrase(groups[i], false));
      }
      append(out, slots.back());
      break;
    }
    case CaptionStyle::detailed:
      out = {"tmpl.a", "tmpl.photo", "tmpl.of"};
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i > 0) {
          const auto& prev = groups[i - 1];
          const auto& cur = groups[i];
          std::optional<Relation> rel;
          if (prev.count == 1 && cur.count == 1) {
            rel = relation_between(object_centroid(scene.objects[prev.members[0]]),
                                   object_centroid(scene.objects[cur.members[0]]));
          }
          out.push_back(rel ? concept_of_relation(*rel) : "tmpl.and");
        }
        append(out, object_phrase(groups[i], true));
      }
      break;
    case CaptionStyle::instruct:
      out = {"tmpl.draw", "tmpl.image", "tmpl.with"};
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i > 0) out.push_back("tmpl.and");
        append(out, object_phrase(groups[i], true));
      }
      break;
  }
  return out;
}

std::vector<std::string> render_concepts(const std::vector<std::string>& concepts,
                                         const Lexicon& lexicon) {
  std::vector<std::string> surfaces;
  surfaces.reserve(concepts.size());
  for (const auto& c : concepts) surfaces.push_back(lexicon.surface(c));
  return surfaces;
}

CaptionRecord caption_scene(const SceneSpec& scene, Language language,
                            const Lexicon& lexicon, CaptionStyle style,
                            std::string scene_id) {
  if (lexicon.language() != language) {
    throw InvalidArgument("caption_scene: lexicon language does not match " +
                          std::string(language_tag(language)));
  }
  CaptionRecord rec;
  rec.scene_id = std::move(scene_id);
  rec.language = language;
  rec.style = style;
  rec.concepts = caption_concepts(scene, style, scene_fingerprint(scene));
  rec.text = join_surfaces(language, render_concepts(rec.concepts, lexicon));
  return rec;
}

}  // namespace mtgrid::scene
