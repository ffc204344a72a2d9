#include <cmath>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "mtgrid/cli/commands.hpp"
#include "mtgrid/cli/context.hpp"
#include "mtgrid/cli/image_export.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"
#include "mtgrid/training/checkpoint.hpp"

namespace mtgrid::cli {

namespace {

using ojson = nlohmann::ordered_json;

Language language_from(const RunConfig& c) {
  const std::string tag = c.get_string("language", "en");
  const auto lang = parse_language(tag);
  if (!lang) throw InvalidArgument("unknown language tag '" + tag + "'");
  return *lang;
}

ojson sampler_json(const SamplerConfig& s) {
  ojson j;
  j["steps"] = s.steps;
  j["guidance_scale"] = s.guidance_scale;
  j["temperature"] = s.temperature;
  return j;
}

// Model, vocabulary and prompt shared by the generation commands.
struct GenerationSetup {
  UnifiedVocab vocab;
  LoadedModel model;
  SamplerConfig sampler;
  Language language;
  std::string prompt;
  std::string prompt_id;
  std::vector<TokenId> prompt_ids;
};

GenerationSetup setup(const RunConfig& c) {
  const auto lexicons = load_lexicons(c);
  GenerationSetup s{make_vocab(lexicons), {}, sampler_config_from(c), language_from(c), "", "", {}};
  if (c.get_string("checkpoint", "").empty()) throw InvalidArgument("checkpoint (--checkpoint) is required");
  s.model = load_model(c, s.vocab);
  s.prompt = c.get_string("prompt", "");
  s.prompt_id = c.get_string("prompt_id", "prompt");
  s.prompt_ids = encode_text(s.prompt, s.vocab, s.language);
  return s;
}

ojson base_record(const GenerationSetup& s, std::uint64_t seed) {
  ojson j;
  j["prompt_id"] = s.prompt_id;
  j["language"] = language_tag(s.language);
  j["seed"] = seed;
  j["prompt"] = s.prompt;
  j["checkpoint"] = s.model.source;
  j["sampler"] = sampler_json(s.sampler);
  return j;
}

void finish_record(ojson& j, const Canvas& canvas, const std::vector<std::string>& warnings,
                   const std::string& image) {
  j["rows"] = canvas.rows;
  j["cols"] = canvas.cols;
  j["grid"] = canvas.cells;
  j["image"] = image;
  j["warnings"] = warnings;
}

std::vector<bool> region_mask(const std::string& spec, int side) {
  std::vector<int> v;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const std::string part = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InvalidArgument("region must be row0,col0,row1,col1, got '" + spec + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (v.size() != 4) throw InvalidArgument("region must be row0,col0,row1,col1, got '" + spec + "'");
  const int r0 = v[0], c0 = v[1], r1 = v[2], c1 = v[3];
  if (r0 < 0 || c0 < 0 || r1 > side || c1 > side || r0 > r1 || c0 > c1) {
    throw InvalidArgument("region " + spec + " lies outside the " + std::to_string(side) + "x" +
                          std::to_string(side) + " grid");
  }
  std::vector<bool> mask(static_cast<std::size_t>(side * side), false);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) mask[static_cast<std::size_t>(r * side + c)] = true;
  }
  return mask;
}

void write_outputs(CommandContext& ctx, const std::string& records) {
  write_file_atomically(ctx.out_dir / "generations.jsonl", records);
  ctx.write_snapshot();
}

}  // namespace

LoadedModel load_model(const RunConfig& c, const UnifiedVocab& vocab) {
  const std::string source = c.get_string("checkpoint", "");
  LoadedModel m;
  m.source = source;
  if (source == "random") {
    m.config = model_config_from(c, vocab);
    m.params = init_parameters(m.config);
    return m;
  }
  Checkpoint ck = load_checkpoint(source);
  if (ck.model_config.vocab_size != vocab.size() ||
      ck.model_config.image_offset != vocab.image_offset()) {
    throw InvalidArgument("checkpoint " + source + " was trained with a different vocabulary (" +
                          std::to_string(ck.model_config.vocab_size) + " ids, current " +
                          std::to_string(vocab.size()) + ")");
  }
  m.config = ck.model_config;
  m.params = std::move(ck.params);
  return m;
}

SamplerConfig sampler_config_from(const RunConfig& c) {
  SamplerConfig s;
  s.steps = static_cast<int>(c.get_int("sampler.steps", s.steps));
  s.guidance_scale = c.get_double("sampler.guidance_scale", s.guidance_scale);
  s.temperature = c.get_double("sampler.temperature", s.temperature);
  validate_sampler_config(s);
  return s;
}

TokenGrid read_grid_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto cells = j.at("grid").get<std::vector<int>>();
      const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells.size()))));
      if (side * side != static_cast<int>(cells.size()) || side == 0) {
        throw InvalidArgument(path.string() + ": grid is not square");
      }
      TokenGrid grid(side, 0);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] < 0 || cells[i] >= kCodebookSize) {
          throw InvalidArgument(path.string() + ": palette index " + std::to_string(cells[i]) +
                                " out of range");
        }
        grid.tokens[i] = static_cast<PaletteIndex>(cells[i]);
      }
      return grid;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path.string() + ": " + e.what());
    }
  }
  throw InvalidArgument(path.string() + ": no grid record");
}

int run_generate(CommandContext& ctx) {
  const GenerationSetup s = setup(ctx.config);
  const int count = static_cast<int>(ctx.config.get_int("count", 1));
  if (count < 1) throw InvalidArgument("count must be >= 1");
  std::vector<GenerationRequest> requests;
  for (int i = 0; i < count; ++i) {
    GenerationRequest req;
    req.prompt_ids = s.prompt_ids;
    req.seed = mix_seed({ctx.seed, static_cast<std::uint64_t>(i)});
    requests.push_back(std::move(req));
  }
  const auto results = generate_batch(s.model.params, s.model.config, s.vocab, requests, s.sampler);
  std::filesystem::create_directories(ctx.out_dir / "images");
  std::string records;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::uint64_t seed = requests[i].seed;
    const std::string image = "images/" + image_filename(s.prompt_id, s.language, seed);
    const Canvas canvas = to_canvas(results[i].grid);
    write_ppm(canvas, ctx.out_dir / image);
    ojson j = base_record(s, seed);
    j["index"] = i;
    finish_record(j, canvas, results[i].warnings, image);
    records += j.dump() + "\n";
  }
  write_outputs(ctx, records);
  *ctx.out << "wrote " << results.size() << " grid(s) to " << ctx.out_dir.string() << "\n";
  return kExitOk;
}

int run_inpaint(CommandContext& ctx) {
  const GenerationSetup s = setup(ctx.config);
  const std::string input = ctx.config.get_string("input", "");
  if (input.empty()) throw InvalidArgument("input (--input) is required");
  const TokenGrid grid = read_grid_record(input);
  const std::string region_spec = ctx.config.get_string("region", "");
  if (region_spec.empty()) throw InvalidArgument("region (--region) is required");
  const auto region = region_mask(region_spec, grid.side);
  const std::uint64_t seed = mix_seed({ctx.seed});
  const auto result = inpaint(s.model.params, s.model.config, s.vocab, grid, region, s.prompt_ids,
                              s.sampler, seed);
  std::filesystem::create_directories(ctx.out_dir / "images");
  const std::string image = "images/" + image_filename(s.prompt_id, s.language, seed);
  const Canvas canvas = to_canvas(result.grid);
  write_ppm(canvas, ctx.out_dir / image);
  ojson j = base_record(s, seed);
  j["input"] = input;
  j["region"] = region_spec;
  finish_record(j, canvas, result.warnings, image);
  write_outputs(ctx, j.dump() + "\n");
  *ctx.out << "wrote inpainted grid to " << ctx.out_dir.string() << "\n";
  return kExitOk;
}

int run_extrapolate(CommandContext& ctx) {
  const GenerationSetup s = setup(ctx.config);
  const std::string input = ctx.config.get_string("input", "");
  if (input.empty()) throw InvalidArgument("input (--input) is required");
  const TokenGrid grid = read_grid_record(input);
  const std::string dir_s = ctx.config.get_string("direction", "right");
  Direction direction;
  if (dir_s == "left") direction = Direction::left;
  else if (dir_s == "right") direction = Direction::right;
  else throw InvalidArgument("direction must be left or right, got '" + dir_s + "'");
  const int cols = static_cast<int>(ctx.config.get_int("cols", 4));
  const std::uint64_t seed = mix_seed({ctx.seed});
  const auto result = extrapolate(s.model.params, s.model.config, s.vocab, grid, direction, cols,
                                  s.prompt_ids, s.sampler, seed);
  std::filesystem::create_directories(ctx.out_dir / "images");
  const std::string image = "images/" + image_filename(s.prompt_id, s.language, seed);
  write_ppm(result.canvas, ctx.out_dir / image);
  ojson j = base_record(s, seed);
  j["input"] = input;
  j["direction"] = dir_s;
  j["new_cols"] = cols;
  finish_record(j, result.canvas, result.generation.warnings, image);
  write_outputs(ctx, j.dump() + "\n");
  *ctx.out << "wrote extrapolated canvas to " << ctx.out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace mtgrid::cli
