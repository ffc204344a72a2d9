#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtgrid/cli/run_config.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/sampling/sampler.hpp"
#include "mtgrid/scene/lexicon.hpp"
#include "mtgrid/tokenizer/vocab.hpp"

namespace mtgrid::cli {

// Everything a subcommand needs: the resolved configuration, its run
// directory and output streams.
struct CommandContext {
  std::string command;
  RunConfig config;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int workers = 1;
  std::ostream* out = nullptr;
  std::ostream* log = nullptr;

  // Writes `<out_dir>/resolved_config.toml`.
  void write_snapshot() const;
};

// Lexicons from `lexicons` (a directory) when set, else the built-in set.
scene::LexiconSet load_lexicons(const RunConfig& config);
// The unified vocabulary over every lexicon surface form.
UnifiedVocab make_vocab(const scene::LexiconSet& lexicons);

std::vector<Language> parse_languages(const std::vector<std::string>& tags);
std::vector<std::string> all_language_tags();
std::vector<std::string> all_stage_names();

// Model shape from the model.* keys.
ModelConfig model_config_from(const RunConfig& config, const UnifiedVocab& vocab);

struct LoadedModel {
  ModelConfig config;
  Parameters params;
  std::string source;  // checkpoint prefix or "random"
};

// The `checkpoint` key names a checkpoint prefix or manifest; "random"
// initializes a model from the model.* keys instead. Throws when the
// checkpoint's vocabulary differs from the current one.
LoadedModel load_model(const RunConfig& config, const UnifiedVocab& vocab);

// Sampler settings from the sampler.* keys.
SamplerConfig sampler_config_from(const RunConfig& config);

// A grid from the first record of a JSONL file whose "grid" field is a flat
// row-major array of palette indices.
TokenGrid read_grid_record(const std::filesystem::path& path);

int run_dataset(CommandContext& ctx);
int run_train(CommandContext& ctx);
int run_generate(CommandContext& ctx);
int run_inpaint(CommandContext& ctx);
int run_extrapolate(CommandContext& ctx);
int run_merge(CommandContext& ctx);
int run_eval(CommandContext& ctx);
int run_prompts(CommandContext& ctx);

}  // namespace mtgrid::cli
