#include "mtgrid/sampling/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"
#include "mtgrid/model/transformer.hpp"

namespace mtgrid {

void validate_sampler_config(const SamplerConfig& c) {
  if (c.steps < 1) throw InvalidArgument("sampler: steps must be >= 1");
  if (!(c.guidance_scale >= 0.0)) throw InvalidArgument("sampler: guidance scale must be >= 0");
  if (!(c.temperature >= 0.0)) throw InvalidArgument("sampler: temperature must be >= 0");
}

template <typename T>
RowMatrix<T> guided_logits(const RowMatrix<T>& cond, const RowMatrix<T>& uncond, double scale) {
  if (cond.rows() != uncond.rows() || cond.cols() != uncond.cols()) {
    throw InvalidArgument("guided_logits: shapes differ");
  }
  if (scale == 1.0) return cond;
  if (scale == 0.0) return uncond;
  return uncond + static_cast<T>(scale) * (cond - uncond);
}

int committed_after(int t, int total_steps, int n_free) {
  if (t >= total_steps) return n_free;
  if (t <= 0) return 0;
  const double frac = 1.0 - std::cos(std::numbers::pi * t / (2.0 * total_steps));
  return std::min(n_free, static_cast<int>(std::ceil(frac * n_free - 1e-9)));
}

double temperature_at(int t, const SamplerConfig& c) {
  return c.temperature * (1.0 - static_cast<double>(t) / c.steps);
}

namespace {

struct RequestState {
  std::size_t index = 0;
  std::vector<TokenId> image;   // MASK at uncommitted free cells
  std::vector<int> masked;      // uncommitted free cells, ascending
  int n_free = 0;
  int committed = 0;
  Rng rng{0};
};

struct Candidate {
  int cell;
  TokenId token;
  double confidence;
};

// Draws a codebook index from softmax(logits / tau) (argmax when tau = 0)
// and returns it with its confidence score.
std::pair<int, double> draw_token(const RowVector<float>& logits, double tau, Rng& rng) {
  const Eigen::Index k = logits.size();
  std::vector<double> z(static_cast<std::size_t>(k));
  const double t = tau > 0.0 ? tau : 1.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < k; ++i) {
    z[static_cast<std::size_t>(i)] = static_cast<double>(logits(i)) / t;
    mx = std::max(mx, z[static_cast<std::size_t>(i)]);
  }
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  int choice = 0;
  if (tau > 0.0) {
    double u = rng.uniform() * sum;
    choice = static_cast<int>(k) - 1;
    for (Eigen::Index i = 0; i < k; ++i) {
      u -= z[static_cast<std::size_t>(i)];
      if (u < 0.0) {
        choice = static_cast<int>(i);
        break;
      }
    }
  } else {
    for (Eigen::Index i = 1; i < k; ++i) {
      if (z[static_cast<std::size_t>(i)] > z[static_cast<std::size_t>(choice)]) choice = static_cast<int>(i);
    }
  }
  double confidence = std::log(z[static_cast<std::size_t>(choice)] / sum);
  if (tau > 0.0) confidence += tau * rng.gumbel();
  return {choice, confidence};
}

}  // namespace

std::vector<GenerationResult> generate_batch(const Parameters& params,
                                             const ModelConfig& model_config,
                                             const UnifiedVocab& vocab,
                                             const std::vector<GenerationRequest>& requests,
                                             const SamplerConfig& sampler) {
  validate_sampler_config(sampler);
  const TokenId mask_id = special_id(Special::mask);
  std::vector<GenerationResult> results(requests.size());
  std::vector<RequestState> active;
  int image_len = -1;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    const GenerationRequest& req = requests[r];
    validate_grid(req.initial);
    const int m = req.initial.cell_count();
    if (image_len >= 0 && m != image_len) throw InvalidArgument("generate: requests differ in grid size");
    image_len = m;
    if (!req.frozen.empty() && static_cast<int>(req.frozen.size()) != m) {
      throw InvalidArgument("generate: frozen mask size differs from the grid");
    }
    results[r].grid = req.initial;
    RequestState s;
    s.index = r;
    s.image = grid_to_ids(req.initial, vocab);
    for (int cell = 0; cell < m; ++cell) {
      if (req.frozen.empty() || !req.frozen[static_cast<std::size_t>(cell)]) {
        s.image[static_cast<std::size_t>(cell)] = mask_id;
        s.masked.push_back(cell);
      }
    }
    s.n_free = static_cast<int>(s.masked.size());
    if (s.n_free == 0) {
      results[r].warnings.push_back("all cells frozen; grid returned unchanged");
      continue;
    }
    s.rng = Rng(mix_seed({req.seed, 0x5a4d}));
    active.push_back(std::move(s));
  }
  if (active.empty()) return results;

  const int max_prompt = model_config.max_seq_len - t2i_sequence_length(0, image_len);
  const std::vector<TokenId> null_prompt;
  std::map<int, AttentionMask> masks;  // by text block end
  auto mask_for = [&](const SequenceLayout& layout) -> const AttentionMask& {
    auto it = masks.find(layout.text_block.end);
    if (it == masks.end()) it = masks.emplace(layout.text_block.end, build_attention_mask(layout)).first;
    return it->second;
  };

  Transformer<float> model(params, model_config);
  std::vector<TokenSequence> sequences;
  std::vector<ModelInput> inputs;
  std::vector<int> cond_rows, uncond_rows;
  for (int t = 1; t <= sampler.steps; ++t) {
    sequences.clear();
    for (const RequestState& s : active) {
      sequences.push_back(assemble_t2i_sequence(requests[s.index].prompt_ids, s.image, vocab,
                                                max_prompt, image_len));
      sequences.push_back(assemble_t2i_sequence(null_prompt, s.image, vocab, max_prompt, image_len));
    }
    inputs.clear();
    for (const auto& seq : sequences) inputs.push_back({seq.ids, &mask_for(seq.layout)});
    model.run(inputs, false);

    cond_rows.clear();
    uncond_rows.clear();
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int base = sequences[2 * a].layout.image_span.start;
      for (int cell : active[a].masked) {
        cond_rows.push_back(model.row_of(2 * a, base + cell));
        uncond_rows.push_back(model.row_of(2 * a + 1, base + cell));
      }
    }
    const RowMatrix<float> guided =
        guided_logits<float>(model.image_logits(cond_rows), model.image_logits(uncond_rows),
                             sampler.guidance_scale);
    if (!guided.allFinite()) throw NumericError("non-finite guided logits at sampling step " + std::to_string(t));

    const double tau = temperature_at(t, sampler);
    Eigen::Index row = 0;
    for (RequestState& s : active) {
      std::vector<Candidate> candidates;
      candidates.reserve(s.masked.size());
      for (int cell : s.masked) {
        const RowVector<float> logits = guided.row(row++);
        const auto [code, confidence] = draw_token(logits, tau, s.rng);
        candidates.push_back({cell, vocab.image_offset() + code, confidence});
      }
      const int target = committed_after(t, sampler.steps, s.n_free);
      const auto take = static_cast<std::size_t>(target - s.committed);
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
      for (std::size_t i = 0; i < take; ++i) {
        s.image[static_cast<std::size_t>(candidates[i].cell)] = candidates[i].token;
      }
      s.committed = target;
      std::vector<int> still;
      for (int cell : s.masked) {
        if (s.image[static_cast<std::size_t>(cell)] == mask_id) still.push_back(cell);
      }
      s.masked = std::move(still);
      GenerationResult& res = results[s.index];
      res.committed_per_step.push_back(s.committed);
      res.forward_pairs += 1;
    }
  }
  for (const RequestState& s : active) {
    results[s.index].grid = ids_to_grid(s.image, vocab);
  }
  return results;
}

GenerationResult generate(const Parameters& params, const ModelConfig& model_config,
                          const UnifiedVocab& vocab, const GenerationRequest& request,
                          const SamplerConfig& sampler) {
  return generate_batch(params, model_config, vocab, {request}, sampler).front();
}

GenerationResult inpaint(const Parameters& params, const ModelConfig& model_config,
                         const UnifiedVocab& vocab, const TokenGrid& grid,
                         const std::vector<bool>& region, const std::vector<TokenId>& prompt_ids,
                         const SamplerConfig& sampler, std::uint64_t seed) {
  validate_grid(grid);
  if (static_cast<int>(region.size()) != grid.cell_count()) {
    throw InvalidArgument("inpaint: region size differs from the grid");
  }
  if (std::none_of(region.begin(), region.end(), [](bool b) { return b; })) {
    GenerationResult identity;
    identity.grid = grid;
    return identity;
  }
  GenerationRequest request;
  request.prompt_ids = prompt_ids;
  request.initial = grid;
  request.seed = seed;
  request.frozen.resize(region.size());
  for (std::size_t i = 0; i < region.size(); ++i) request.frozen[i] = !region[i];
  return generate(params, model_config, vocab, request, sampler);
}

Canvas to_canvas(const TokenGrid& grid) {
  return Canvas{grid.side, grid.side, grid.tokens};
}

ExtrapolationWindow extrapolation_window(int side, Direction direction, int n_cols) {
  if (n_cols < 0) throw InvalidArgument("extrapolate: negative column count");
  if (n_cols > side) {
    throw InvalidArgument("extrapolate: " + std::to_string(n_cols) +
                          " new columns exceed the trained image span of " + std::to_string(side));
  }
  ExtrapolationWindow w;
  if (direction == Direction::right) {
    w.new_start = side - n_cols;
    w.source_start = n_cols;
    w.kept_start = 0;
  } else {
    w.new_start = 0;
    w.source_start = 0;
    w.kept_start = n_cols;
  }
  w.frozen.assign(static_cast<std::size_t>(side * side), true);
  for (int r = 0; r < side; ++r) {
    for (int c = w.new_start; c < w.new_start + n_cols; ++c) {
      w.frozen[static_cast<std::size_t>(r * side + c)] = false;
    }
  }
  return w;
}

ExtrapolationResult extrapolate(const Parameters& params, const ModelConfig& model_config,
                                const UnifiedVocab& vocab, const TokenGrid& grid,
                                Direction direction, int n_cols,
                                const std::vector<TokenId>& prompt_ids,
                                const SamplerConfig& sampler, std::uint64_t seed) {
  validate_grid(grid);
  const int side = grid.side;
  const ExtrapolationWindow w = extrapolation_window(side, direction, n_cols);
  ExtrapolationResult out;
  if (n_cols == 0) {
    out.canvas = to_canvas(grid);
    out.generation.grid = grid;
    return out;
  }
  GenerationRequest request;
  request.prompt_ids = prompt_ids;
  request.seed = seed;
  request.frozen = w.frozen;
  request.initial = TokenGrid(side, 0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side - n_cols; ++c) {
      request.initial.at(r, w.kept_start + c) = grid.at(r, w.source_start + c);
    }
  }
  out.generation = generate(params, model_config, vocab, request, sampler);
  out.canvas.rows = side;
  out.canvas.cols = side + n_cols;
  out.canvas.cells.assign(static_cast<std::size_t>(side * (side + n_cols)), 0);
  const int orig_offset = direction == Direction::right ? 0 : n_cols;
  const int new_offset = direction == Direction::right ? side : 0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) out.canvas.at(r, orig_offset + c) = grid.at(r, c);
    for (int c = 0; c < n_cols; ++c) {
      out.canvas.at(r, new_offset + c) = out.generation.grid.at(r, w.new_start + c);
    }
  }
  return out;
}

template RowMatrix<float> guided_logits<float>(const RowMatrix<float>&, const RowMatrix<float>&, double);
template RowMatrix<double> guided_logits<double>(const RowMatrix<double>&, const RowMatrix<double>&, double);

}  // namespace mtgrid
