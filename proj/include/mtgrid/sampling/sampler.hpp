#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtgrid/model/parameters.hpp"
#include "mtgrid/tokenizer/sequence.hpp"

namespace mtgrid {

struct SamplerConfig {
  int steps = 16;                // T
  double guidance_scale = 1.75;  // s
  double temperature = 1.0;      // tau_0; annealed linearly to 0 at the last step
  std::uint64_t rng_seed = 0;
};

// Throws InvalidArgument unless T >= 1, s >= 0 and tau_0 >= 0.
void validate_sampler_config(const SamplerConfig& config);

// g = uncond + s (cond - uncond).
template <typename T>
RowMatrix<T> guided_logits(const RowMatrix<T>& cond, const RowMatrix<T>& uncond, double scale);

// Cells committed after step t (1-based) out of n_free:
// ceil((1 - cos(pi t / 2T)) n_free), which reaches n_free at t = T.
int committed_after(int t, int total_steps, int n_free);

// Temperature used at step t (1-based): tau_0 (1 - t / T).
double temperature_at(int t, const SamplerConfig& config);

struct GenerationRequest {
  std::vector<TokenId> prompt_ids;
  // Cells marked frozen keep their value from `initial`; the rest start as
  // MASK. An empty frozen vector means nothing is frozen.
  std::vector<bool> frozen;
  TokenGrid initial;
  std::uint64_t seed = 0;  // per-request stream
};

struct GenerationResult {
  TokenGrid grid;
  std::vector<int> committed_per_step;  // cumulative committed free cells after each step
  int forward_pairs = 0;                // conditional/unconditional forward pairs run
  std::vector<std::string> warnings;
};

// Confidence-ordered parallel unmasking with classifier-free guidance.
// Each step runs the conditional and null-prompt sequences, samples a token
// for every masked free cell at the current temperature, and commits the
// most confident cells (log-probability plus temperature-scaled Gumbel
// noise, ties to the lower cell index) until the cosine schedule's count is
// reached. Committed and frozen cells never change afterwards. Sampling is
// restricted to the image codebook.
std::vector<GenerationResult> generate_batch(const Parameters& params,
                                             const ModelConfig& model_config,
                                             const UnifiedVocab& vocab,
                                             const std::vector<GenerationRequest>& requests,
                                             const SamplerConfig& sampler);

GenerationResult generate(const Parameters& params, const ModelConfig& model_config,
                          const UnifiedVocab& vocab, const GenerationRequest& request,
                          const SamplerConfig& sampler);

// Regenerates the cells marked in region; everything else is frozen. An
// empty region returns the input unchanged without running the model.
GenerationResult inpaint(const Parameters& params, const ModelConfig& model_config,
                         const UnifiedVocab& vocab, const TokenGrid& grid,
                         const std::vector<bool>& region, const std::vector<TokenId>& prompt_ids,
                         const SamplerConfig& sampler, std::uint64_t seed);

// Rows x cols palette canvas, row-major; wider than a TokenGrid after
// extrapolation.
struct Canvas {
  int rows = 0;
  int cols = 0;
  std::vector<PaletteIndex> cells;

  PaletteIndex at(int r, int c) const { return cells[static_cast<std::size_t>(r * cols + c)]; }
  PaletteIndex& at(int r, int c) { return cells[static_cast<std::size_t>(r * cols + c)]; }
  friend bool operator==(const Canvas&, const Canvas&) = default;
};

Canvas to_canvas(const TokenGrid& grid);

enum class Direction { left, right };

struct ExtrapolationWindow {
  // Model-grid columns [new_start, new_start + n_cols) are generated; the
  // others hold original columns [source_start, source_start + side - n_cols).
  int new_start = 0;
  int source_start = 0;
  int kept_start = 0;  // first model-grid column holding original content
  std::vector<bool> frozen;
};

// Where the original content and the new columns sit inside the fixed-size
// model grid. Throws InvalidArgument when n_cols exceeds the grid side.
ExtrapolationWindow extrapolation_window(int side, Direction direction, int n_cols);

struct ExtrapolationResult {
  Canvas canvas;  // side x (side + n_cols), original columns preserved
  GenerationResult generation;
};

// The grid is shifted inside the fixed model span so that n_cols free
// columns open on the requested side; the generated columns are then
// attached to the untouched original.
ExtrapolationResult extrapolate(const Parameters& params, const ModelConfig& model_config,
                                const UnifiedVocab& vocab, const TokenGrid& grid,
                                Direction direction, int n_cols,
                                const std::vector<TokenId>& prompt_ids,
                                const SamplerConfig& sampler, std::uint64_t seed);

}  // namespace mtgrid
