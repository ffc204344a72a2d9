#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtgrid/model/attention_mask.hpp"
#include "mtgrid/model/config.hpp"
#include "mtgrid/scene/dataset.hpp"
#include "mtgrid/training/checkpoint.hpp"
#include "mtgrid/training/optimizer.hpp"

namespace mtgrid {

struct TrainExample {
  std::vector<TokenId> prompt_ids;
  std::vector<TokenId> image_ids;
  Language language = Language::en;
  scene::CaptionStyle style = scene::CaptionStyle::label;
};

TrainExample make_example(const scene::DatasetRecord& record, const UnifiedVocab& vocab);
std::vector<TrainExample> make_examples(const std::vector<scene::DatasetRecord>& records,
                                        const UnifiedVocab& vocab);

// Longest prompt a model config can hold next to an image of image_len tokens.
int max_prompt_len(const ModelConfig& config, int image_len);

// Attention masks keyed by prompt length (the only thing that varies between
// assembled sequences of one image size).
class MaskCache {
 public:
  const AttentionMask& get(const SequenceLayout& layout);

 private:
  std::map<std::pair<int, int>, AttentionMask> masks_;
};

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
};

// Per example: condition dropout, then masking, then assembly. The loss is
// the mean over examples of each example's masked-position loss. Throws
// NumericError carrying the step index on a non-finite loss or gradient.
StepResult train_step(Parameters& params, AdamState& state, std::span<const TrainExample> batch,
                      const TrainConfig& config, const ModelConfig& model_config,
                      const UnifiedVocab& vocab, int step, Rng& rng, MaskCache& masks);

// Loss and gradient without an update (gradient checks, diagnostics).
template <typename T>
double loss_and_gradient(const ParameterTable<T>& params, const ModelConfig& model_config,
                         const std::vector<TokenSequence>& sequences,
                         const std::vector<std::vector<int>>& positions,
                         const std::vector<std::vector<TokenId>>& targets,
                         LossReduction reduction, ParameterTable<T>* grads, MaskCache& masks);

struct CurriculumStage {
  std::string name;
  int index = 0;  // position in the curriculum; part of the per-step seed
  std::array<double, scene::kNumStyles> style_weights{};
  std::vector<Language> languages{kAllLanguages.begin(), kAllLanguages.end()};
  TrainConfig train;
};

// The five-stage desk curriculum (three pretraining stages, two instruction
// stages). Peak rates are multiples of base_lr in the ratios 1:1:1:2:0.5.
std::vector<CurriculumStage> default_curriculum(double base_lr, std::uint64_t seed,
                                                double length_scale = 1.0);

// Groups example indices by style, keeping only the stage's languages.
class StagePool {
 public:
  StagePool(std::span<const TrainExample> examples, const CurriculumStage& stage);

  // Draws batch_size examples: a style by the stage weights, then an example
  // uniformly within that style.
  std::vector<std::size_t> draw_batch(int batch_size, Rng& rng) const;
  scene::CaptionStyle draw_style(Rng& rng) const;

 private:
  std::array<std::vector<std::size_t>, scene::kNumStyles> by_style_;
  std::array<double, scene::kNumStyles> weights_{};
};

// Seed of the generator used at one step of one stage. Batches depend only on
// (seed, stage, step), so resuming from any checkpoint replays exactly.
std::uint64_t step_seed(std::uint64_t seed, int stage_index, int step);

struct StageReport {
  std::string stage;
  std::vector<StepResult> steps;  // index s holds step s + 1
  std::array<std::int64_t, kNumLanguages> language_counts{};
  std::array<std::int64_t, scene::kNumStyles> style_counts{};
  std::vector<std::filesystem::path> checkpoints;
};

struct StageResult {
  Parameters params;
  AdamState state;
  StageReport report;
};

// Trains one stage from (params, state), which correspond to having finished
// `start_step` steps of this stage (0 for a fresh stage). Checkpoints go to
// `<out_dir>/<stage>-step<NNNNNN>` every save_interval steps and at the end;
// the report is written as `<stage>.report.csv` (step,loss,lr) and
// `<stage>.summary.json`.
using StepCallback = std::function<void(int step, const StepResult& result)>;

StageResult run_stage(const CurriculumStage& stage, const ModelConfig& model_config,
                      const UnifiedVocab& vocab, std::span<const TrainExample> examples,
                      Parameters params, AdamState state, const std::filesystem::path& out_dir,
                      int start_step = 0, const StepCallback& on_step = {});

std::filesystem::path stage_checkpoint_prefix(const std::filesystem::path& out_dir,
                                              const std::string& stage, int step);

}  // namespace mtgrid
