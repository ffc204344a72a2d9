#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/sampling/sampler.hpp"

using namespace mtgrid;
using namespace mtgrid::testing;

namespace {

struct TinySetup {
  UnifiedVocab vocab = tiny_vocab();
  ModelConfig config = tiny_config(2, 16, 2);
  Parameters params = jittered_parameters(config, 11);
};

TokenGrid random_grid(int side, std::uint64_t seed) {
  Rng rng(seed);
  TokenGrid g(side, 0);
  for (auto& v : g.tokens) v = static_cast<PaletteIndex>(rng.below(kCodebookSize));
  return g;
}

GenerationRequest request_for(std::vector<TokenId> prompt, std::uint64_t seed) {
  GenerationRequest r;
  r.prompt_ids = std::move(prompt);
  r.initial = TokenGrid(kTinySide, 0);
  r.seed = seed;
  return r;
}

SamplerConfig steps(int t) {
  SamplerConfig c;
  c.steps = t;
  return c;
}

}  // namespace

TEST_CASE("commit schedule follows the cosine law") {
  CHECK(committed_after(1, 16, 256) == 2);    // 256 (1 - cos(pi/32)) = 1.23
  CHECK(committed_after(8, 16, 256) == 75);   // 256 (1 - cos(pi/4)) = 74.98
  CHECK(committed_after(16, 16, 256) == 256);
  CHECK(committed_after(0, 16, 256) == 0);
  CHECK(committed_after(1, 1, 7) == 7);
  for (int total : {1, 2, 5, 16, 32}) {
    for (int n : {1, 3, 16, 100, 256}) {
      int prev = 0;
      for (int t = 1; t <= total; ++t) {
        const int c = committed_after(t, total, n);
        const double exact = (1.0 - std::cos(std::numbers::pi * t / (2.0 * total))) * n;
        CHECK(c >= prev);
        CHECK(c <= n);
        if (t < total) CHECK(c == static_cast<int>(std::ceil(exact - 1e-9)));
        prev = c;
      }
      CHECK(prev == n);
    }
  }
}

TEST_CASE("temperature anneals linearly to zero") {
  SamplerConfig c;
  c.steps = 16;
  c.temperature = 1.0;
  CHECK(temperature_at(8, c) == doctest::Approx(0.5));
  CHECK(temperature_at(16, c) == doctest::Approx(0.0));
  c.temperature = 2.0;
  CHECK(temperature_at(4, c) == doctest::Approx(1.5));
}

TEST_CASE("guided logits extrapolate away from the null prompt") {
  RowMatrix<double> cond(1, 3), uncond(1, 3);
  cond << 1.0, 2.0, -1.0;
  uncond << 0.0, 4.0, -1.0;
  const RowMatrix<double> g = guided_logits(cond, uncond, 1.75);
  CHECK(g(0, 0) == doctest::Approx(1.75));
  CHECK(g(0, 1) == doctest::Approx(0.5));
  CHECK(g(0, 2) == doctest::Approx(-1.0));
  CHECK(guided_logits(cond, uncond, 1.0) == cond);
  CHECK(guided_logits(cond, uncond, 0.0) == uncond);
  CHECK_THROWS_AS(guided_logits(cond, RowMatrix<double>(2, 3), 1.0), InvalidArgument);
}

TEST_CASE("sampler config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(validate_sampler_config(c));
  c.steps = 0;
  CHECK_THROWS_AS(validate_sampler_config(c), InvalidArgument);
  c = {};
  c.guidance_scale = -0.1;
  CHECK_THROWS_AS(validate_sampler_config(c), InvalidArgument);
  c = {};
  c.temperature = -1.0;
  CHECK_THROWS_AS(validate_sampler_config(c), InvalidArgument);
}

TEST_CASE("generation fills every cell and follows the schedule") {
  const TinySetup s;
  for (int t : {1, 3, 16}) {
    const GenerationResult r = generate(s.params, s.config, s.vocab, request_for({8, 10}, 5), steps(t));
    CHECK_NOTHROW(validate_grid(r.grid));
    CHECK(r.grid.side == kTinySide);
    CHECK(r.forward_pairs == t);
    REQUIRE(static_cast<int>(r.committed_per_step.size()) == t);
    for (int i = 1; i <= t; ++i) {
      CHECK(r.committed_per_step[static_cast<std::size_t>(i - 1)] == committed_after(i, t, kTinyImageLen));
    }
    CHECK(r.warnings.empty());
  }
}

TEST_CASE("generation is deterministic in the request seed") {
  const TinySetup s;
  const auto a = generate(s.params, s.config, s.vocab, request_for({8, 10}, 42), steps(4));
  const auto b = generate(s.params, s.config, s.vocab, request_for({8, 10}, 42), steps(4));
  CHECK(a.grid == b.grid);
  bool any_differs = false;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto c = generate(s.params, s.config, s.vocab, request_for({8, 10}, seed), steps(4));
    any_differs = any_differs || c.grid != a.grid;
  }
  CHECK(any_differs);
}

TEST_CASE("batched requests match single requests") {
  const TinySetup s;
  std::vector<GenerationRequest> reqs = {request_for({8, 10}, 1), request_for({9}, 2),
                                         request_for({}, 3)};
  const auto batch = generate_batch(s.params, s.config, s.vocab, reqs, steps(4));
  REQUIRE(batch.size() == reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    CHECK(batch[i].grid == generate(s.params, s.config, s.vocab, reqs[i], steps(4)).grid);
  }
}

TEST_CASE("zero temperature ignores the seed") {
  const TinySetup s;
  SamplerConfig c = steps(4);
  c.temperature = 0.0;
  const auto a = generate(s.params, s.config, s.vocab, request_for({8, 10}, 1), c);
  const auto b = generate(s.params, s.config, s.vocab, request_for({8, 10}, 999), c);
  CHECK(a.grid == b.grid);
}

TEST_CASE("zero guidance ignores the prompt") {
  const TinySetup s;
  SamplerConfig c = steps(4);
  c.guidance_scale = 0.0;
  const auto a = generate(s.params, s.config, s.vocab, request_for({8, 10}, 3), c);
  const auto b = generate(s.params, s.config, s.vocab, request_for({11, 12, 13}, 3), c);
  CHECK(a.grid == b.grid);
}

TEST_CASE("frozen cells keep their values") {
  const TinySetup s;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GenerationRequest r = request_for({9}, seed);
    r.initial = random_grid(kTinySide, seed + 100);
    Rng rng(seed);
    r.frozen.resize(kTinyImageLen);
    int n_free = 0;
    for (std::size_t i = 0; i < r.frozen.size(); ++i) {
      r.frozen[i] = rng.uniform() < 0.5;
      n_free += r.frozen[i] ? 0 : 1;
    }
    const auto out = generate(s.params, s.config, s.vocab, r, steps(3));
    for (std::size_t i = 0; i < r.frozen.size(); ++i) {
      if (r.frozen[i]) CHECK(out.grid.tokens[i] == r.initial.tokens[i]);
    }
    if (n_free > 0) CHECK(out.committed_per_step.back() == n_free);
  }
}

TEST_CASE("fully frozen request returns the input with a warning") {
  const TinySetup s;
  GenerationRequest r = request_for({9}, 1);
  r.initial = random_grid(kTinySide, 3);
  r.frozen.assign(kTinyImageLen, true);
  const auto out = generate(s.params, s.config, s.vocab, r, steps(4));
  CHECK(out.grid == r.initial);
  CHECK(out.forward_pairs == 0);
  CHECK(out.warnings.size() == 1);
}

TEST_CASE("request validation") {
  const TinySetup s;
  GenerationRequest r = request_for({9}, 1);
  r.frozen.assign(3, true);
  CHECK_THROWS_AS(generate(s.params, s.config, s.vocab, r, steps(2)), InvalidArgument);
  std::vector<GenerationRequest> mixed = {request_for({9}, 1), request_for({9}, 2)};
  mixed[1].initial = TokenGrid(3, 0);
  CHECK_THROWS_AS(generate_batch(s.params, s.config, s.vocab, mixed, steps(2)), InvalidArgument);
}

TEST_CASE("inpainting only touches the region") {
  const TinySetup s;
  const TokenGrid grid = random_grid(kTinySide, 9);
  const std::vector<bool> none(kTinyImageLen, false);
  const auto identity = inpaint(s.params, s.config, s.vocab, grid, none, {8}, steps(4), 1);
  CHECK(identity.grid == grid);
  CHECK(identity.forward_pairs == 0);

  std::vector<bool> region(kTinyImageLen, false);
  for (int r = 1; r < 3; ++r) {
    for (int c = 1; c < 3; ++c) region[static_cast<std::size_t>(r * kTinySide + c)] = true;
  }
  const auto out = inpaint(s.params, s.config, s.vocab, grid, region, {8}, steps(4), 1);
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) CHECK(out.grid.tokens[i] == grid.tokens[i]);
  }
  CHECK(out.committed_per_step.back() == 4);
  CHECK_THROWS_AS(inpaint(s.params, s.config, s.vocab, grid, std::vector<bool>(3, true), {8}, steps(2), 1),
                  InvalidArgument);
}

TEST_CASE("extrapolation window places original and new columns") {
  const auto right = extrapolation_window(16, Direction::right, 4);
  CHECK(right.new_start == 12);
  CHECK(right.source_start == 4);
  CHECK(right.kept_start == 0);
  CHECK(std::count(right.frozen.begin(), right.frozen.end(), true) == 16 * 12);
  CHECK_FALSE(right.frozen[15]);
  CHECK(right.frozen[11]);

  const auto left = extrapolation_window(16, Direction::left, 4);
  CHECK(left.new_start == 0);
  CHECK(left.source_start == 0);
  CHECK(left.kept_start == 4);
  CHECK_FALSE(left.frozen[0]);
  CHECK(left.frozen[4]);

  CHECK_THROWS_AS(extrapolation_window(16, Direction::right, 17), InvalidArgument);
  CHECK_THROWS_AS(extrapolation_window(16, Direction::left, -1), InvalidArgument);
}

TEST_CASE("extrapolation keeps the original and widens the canvas") {
  const TinySetup s;
  const TokenGrid grid = random_grid(kTinySide, 21);
  for (Direction d : {Direction::left, Direction::right}) {
    for (int n : {1, 2, 4}) {
      const auto out = extrapolate(s.params, s.config, s.vocab, grid, d, n, {8}, steps(3), 5);
      CHECK(out.canvas.rows == kTinySide);
      CHECK(out.canvas.cols == kTinySide + n);
      const int offset = d == Direction::right ? 0 : n;
      const int new_offset = d == Direction::right ? kTinySide : 0;
      const int new_start = d == Direction::right ? kTinySide - n : 0;
      for (int r = 0; r < kTinySide; ++r) {
        for (int c = 0; c < kTinySide; ++c) CHECK(out.canvas.at(r, offset + c) == grid.at(r, c));
        for (int c = 0; c < n; ++c) {
          CHECK(out.canvas.at(r, new_offset + c) == out.generation.grid.at(r, new_start + c));
        }
      }
      // The context visible to the model is the original columns nearest the new edge.
      const int src = d == Direction::right ? n : 0;
      const int kept = d == Direction::right ? 0 : n;
      for (int r = 0; r < kTinySide; ++r) {
        for (int c = 0; c < kTinySide - n; ++c) {
          CHECK(out.generation.grid.at(r, kept + c) == grid.at(r, src + c));
        }
      }
    }
  }
  const auto none = extrapolate(s.params, s.config, s.vocab, grid, Direction::right, 0, {8}, steps(3), 5);
  CHECK(none.canvas == to_canvas(grid));
}
