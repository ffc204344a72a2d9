#include "mtgrid/scene/dataset.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"

#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"
#include "mtgrid/common/atomic_file.hpp"

namespace mtgrid::scene {
namespace {

CaptionStyle sample_style(const DataMix& mix, Rng& rng) {
  double u = rng.uniform() * 100.0;
  CaptionStyle last = CaptionStyle::label;
  for (int s = 0; s < kNumStyles; ++s) {
    const double w = mix.style_weights[static_cast<std::size_t>(s)];
    if (w <= 0.0) continue;
    last = static_cast<CaptionStyle>(s);
    u -= w;
    if (u < 0.0) return last;
  }
  return last;
}

std::string make_scene_id(std::uint64_t seed, std::uint64_t index) {
  std::string idx = std::to_string(index);
  if (idx.size() < 6) idx.insert(0, 6 - idx.size(), '0');
  return std::to_string(seed) + "-" + idx;
}

}  // namespace

void validate_mix(const DataMix& mix) {
  double total = 0.0;
  for (double w : mix.style_weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw InvalidArgument("mix weights must be non-negative");
    }
    total += w;
  }
  if (std::abs(total - 100.0) > 1e-9) {
    throw InvalidArgument("mix weights sum to " + std::to_string(total) +
                          ", expected 100");
  }
  if (mix.languages.empty()) throw InvalidArgument("mix lists no languages");
}

std::string record_to_json_line(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["scene_id"] = r.scene_id;
  j["language"] = language_tag(r.language);
  j["style"] = style_name(r.style);
  j["caption"] = r.caption;
  j["grid"] = r.grid.tokens;
  return j.dump();
}

DatasetRecord record_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  DatasetRecord r;
  r.scene_id = j.at("scene_id").get<std::string>();
  const auto lang = parse_language(j.at("language").get<std::string>());
  if (!lang) throw InvalidArgument("record has unknown language");
  r.language = *lang;
  const auto style = parse_style(j.at("style").get<std::string>());
  if (!style) throw InvalidArgument("record has unknown style");
  r.style = *style;
  r.caption = j.at("caption").get<std::string>();
  const auto cells = j.at("grid").get<std::vector<int>>();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells.size()))));
  r.grid = TokenGrid(side, 0);
  if (cells.size() != r.grid.tokens.size()) {
    throw InvalidArgument("record grid is not square");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] < 0 || cells[i] >= kCodebookSize) {
      throw InvalidArgument("record grid value out of range");
    }
    r.grid.tokens[i] = static_cast<PaletteIndex>(cells[i]);
  }
  return r;
}

FilterReport build_dataset(const DataMix& mix, std::size_t n_samples,
                           std::uint64_t rng_seed, const LexiconSet& lexicons,
                           const std::filesystem::path& out_path,
                           const CorruptionRates& corruption) {
  validate_mix(mix);
  const std::size_t n_lang = mix.languages.size();
  std::vector<std::size_t> quota(n_lang, n_samples / n_lang);
  for (std::size_t i = 0; i < n_samples % n_lang; ++i) ++quota[i];

  FilterReport report;
  std::string body;
  Rng rng(mix_seed({rng_seed, 0xda7a}));
  std::size_t remaining = n_samples;
  const std::size_t max_scenes = 1000 + 100 * n_samples;

  for (std::uint64_t index = 0; remaining > 0; ++index) {
    if (index >= max_scenes) {
      throw Error("build_dataset: filters reject too many candidates for " +
                  out_path.string());
    }
    const SceneSpec scene = sample_scene(mix_seed({rng_seed, index}));
    const CaptionStyle style = sample_style(mix, rng);
    const auto concepts = caption_concepts(scene, style, scene_fingerprint(scene));
    const TokenGrid grid = render_scene(scene);
    const std::string scene_id = make_scene_id(rng_seed, index);

    for (std::size_t li = 0; li < n_lang; ++li) {
      if (quota[li] == 0) continue;
      const Language lang = mix.languages[li];
      const Lexicon& lexicon = lexicons.at(lang);

      std::vector<std::string> tokens;
      if (rng.uniform() < corruption.mismatched) {
        const SceneSpec other = sample_scene(mix_seed({rng_seed, index, 0xbad}));
        tokens = render_concepts(caption_concepts(other, style, scene_fingerprint(other)),
                                 lexicon);
      } else {
        tokens = render_concepts(concepts, lexicon);
      }
      if (rng.uniform() < corruption.untranslated) {
        const Lexicon& foreign =
            lexicons.at(lang == Language::en ? Language::fr : Language::en);
        for (std::size_t t = tokens.size() / 2; t < tokens.size(); ++t) {
          if (auto c = lexicon.concept_of(tokens[t])) tokens[t] = foreign.surface(*c);
        }
      }

      ++report.total;
      const FilterDecision decision = apply_filters(scene, tokens, lexicon, style);
      if (!decision.keep) {
        ++report.rejected_by[decision.rejected_by];
        continue;
      }
      DatasetRecord record{scene_id, lang, style, join_surfaces(lang, tokens), grid};
      body += record_to_json_line(record);
      body += '\n';
      ++report.kept;
      --quota[li];
      --remaining;
    }
  }
  write_file_atomically(out_path, body);
  return report;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace mtgrid::scene
