#include <ostream>

#include "json.hpp"
#include "mtgrid/cli/commands.hpp"
#include "mtgrid/cli/context.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/scene/dataset.hpp"

namespace mtgrid::cli {

scene::LexiconSet load_lexicons(const RunConfig& config) {
  const std::string dir = config.get_string("lexicons", "");
  if (dir.empty()) return scene::LexiconSet::builtin();
  return scene::LexiconSet::load(dir);
}

UnifiedVocab make_vocab(const scene::LexiconSet& lexicons) {
  return UnifiedVocab(lexicons.surface_table());
}

std::vector<Language> parse_languages(const std::vector<std::string>& tags) {
  std::vector<Language> out;
  for (const auto& t : tags) {
    const auto lang = parse_language(t);
    if (!lang) throw InvalidArgument("unknown language tag '" + t + "'");
    out.push_back(*lang);
  }
  return out;
}

std::vector<std::string> all_language_tags() {
  std::vector<std::string> out;
  for (Language l : kAllLanguages) out.emplace_back(language_tag(l));
  return out;
}

int run_dataset(CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  scene::DataMix mix;
  for (int s = 0; s < scene::kNumStyles; ++s) {
    const std::string name(scene::style_name(static_cast<scene::CaptionStyle>(s)));
    mix.style_weights[static_cast<std::size_t>(s)] = c.get_double("data.weights." + name, 25.0);
  }
  mix.languages = parse_languages(c.get_list("data.languages", all_language_tags()));
  scene::CorruptionRates corruption;
  corruption.untranslated = c.get_double("data.corruption.untranslated", corruption.untranslated);
  corruption.mismatched = c.get_double("data.corruption.mismatched", corruption.mismatched);
  const auto samples = c.get_int("data.samples", 12000);
  if (samples < 1) throw InvalidArgument("data.samples must be >= 1");
  const auto lexicons = load_lexicons(c);
  ctx.write_snapshot();

  const auto report = scene::build_dataset(mix, static_cast<std::size_t>(samples), ctx.seed,
                                           lexicons, ctx.out_dir / "dataset.jsonl", corruption);
  make_vocab(lexicons).save(ctx.out_dir / "vocab.txt");
  nlohmann::ordered_json j;
  j["candidates"] = report.total;
  j["kept"] = report.kept;
  j["rejected"] = report.rejected();
  nlohmann::ordered_json by;
  for (const auto& [name, n] : report.rejected_by) by[name] = n;
  j["rejected_by"] = by;
  write_file_atomically(ctx.out_dir / "filter_report.json", j.dump(2) + "\n");
  *ctx.out << "wrote " << report.kept << " records to " << (ctx.out_dir / "dataset.jsonl").string()
           << " (" << report.rejected() << " candidates filtered)\n";
  return kExitOk;
}

}  // namespace mtgrid::cli
