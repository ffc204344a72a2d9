#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtgrid/scene/caption.hpp"
#include "mtgrid/scene/filters.hpp"
#include "mtgrid/scene/lexicon.hpp"

namespace mtgrid::scene {

// What a curriculum stage draws from: weights over caption styles (summing
// to 100) and the languages it covers.
struct DataMix {
  std::array<double, kNumStyles> style_weights{};
  std::vector<Language> languages{kAllLanguages.begin(), kAllLanguages.end()};

  double weight(CaptionStyle s) const { return style_weights[static_cast<std::size_t>(s)]; }
};

// Throws InvalidArgument unless weights are non-negative, sum to 100 and at
// least one language is listed.
void validate_mix(const DataMix& mix);

// Raw-candidate corruption rates. Candidates are generated clean and then
// corrupted at these rates so the filters have something to remove.
struct CorruptionRates {
  double untranslated = 0.05;  // second half left in another language
  double mismatched = 0.05;    // caption of a different scene
};

struct DatasetRecord {
  std::string scene_id;
  Language language = Language::en;
  CaptionStyle style = CaptionStyle::label;
  std::string caption;
  TokenGrid grid;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

std::string record_to_json_line(const DatasetRecord& record);
DatasetRecord record_from_json_line(const std::string& line);

// Generates a JSONL shard with n_samples records balanced across the mix's
// languages (counts differ by at most one). Every written record passes all
// filters; the returned report accounts for every candidate examined.
FilterReport build_dataset(const DataMix& mix, std::size_t n_samples,
                           std::uint64_t rng_seed, const LexiconSet& lexicons,
                           const std::filesystem::path& out_path,
                           const CorruptionRates& corruption = {});

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);

}  // namespace mtgrid::scene
