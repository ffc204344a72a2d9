#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtgrid/evaluation/metrics.hpp"
#include "mtgrid/evaluation/prompts.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/sampling/sampler.hpp"

namespace mtgrid::eval {

struct EvalConfig {
  int samples_per_prompt = 4;  // K generations per (prompt, language)
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  std::vector<std::string> backends = {"histogram-moment", "downsample-raw"};
  bool code_switch = true;
  int workers = 1;
};

// Rates per dimension for one language; overall is the unweighted mean of
// the six rates.
struct CompositionalScore {
  std::array<double, kNumDimensions> rate{};
  std::array<int, kNumDimensions> trials{};
  double overall = 0.0;
};

struct ClcReport {
  std::string backend;
  std::vector<double> per_prompt;  // in prompt-id order
  double overall = 0.0;
  int languages = 0;
  int samples_per_prompt = 0;
  int prompts = 0;
};

struct CssReport {
  std::string backend;
  std::vector<CssPair> per_prompt;
  double ef = 0.0;
  double es = 0.0;
};

struct EvalReport {
  std::vector<std::string> prompt_ids;  // sorted
  std::map<Language, CompositionalScore> compositional;
  std::vector<ClcReport> clc;
  std::vector<CssReport> css;
};

// Seed of generation k for (prompt, language).
std::uint64_t generation_seed(std::uint64_t eval_seed, const std::string& prompt_id,
                              Language language, int k);
// Seed of the code-switch generation for (prompt, variant, target).
std::uint64_t code_switch_seed(std::uint64_t eval_seed, const std::string& prompt_id,
                               CodeSwitchVariant variant, Language target);

// Generates K images per (prompt, language), scores them with the oracle,
// computes the cross-lingual score against the English generations and the
// code-switch scores against the first English generation, and writes
// into out_dir:
//   generations.jsonl   one record per image (id, prompt, language, seed, flat grid)
//   compositional.jsonl per-image pass flags
//   compositional.csv   per-language dimension rates and overall
//   clc.jsonl, css.jsonl per-prompt values for every backend
//   summary.json, summary.csv  means and quartiles
// Throws InvalidArgument when the prompt set does not cover all six
// dimensions or a prompt lacks text in some language.
EvalReport run_eval_suite(const Parameters& params, const ModelConfig& model_config,
                          const UnifiedVocab& vocab, const scene::LexiconSet& lexicons,
                          std::vector<PromptRecord> prompts, const EvalConfig& config,
                          const std::filesystem::path& out_dir);

}  // namespace mtgrid::eval
