#include <iomanip>
#include <ostream>

#include "mtgrid/cli/commands.hpp"
#include "mtgrid/cli/context.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/evaluation/suite.hpp"
#include "mtgrid/merging/merge.hpp"

namespace mtgrid::cli {

int run_merge(CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  MergeSpec spec;
  for (const auto& p : c.get_list("merge.checkpoints", {})) spec.checkpoints.emplace_back(p);
  if (spec.checkpoints.empty()) throw InvalidArgument("merge needs at least one checkpoint");
  spec.strategy = parse_strategy(c.get_string("merge.strategy", "sma"));
  spec.ema_alpha = c.get_double("merge.alpha", spec.ema_alpha);
  for (const auto& w : c.get_list("merge.weights", {})) {
    try {
      std::size_t used = 0;
      spec.wma_weights.push_back(std::stod(w, &used));
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw InvalidArgument("merge.weights entry '" + w + "' is not a number");
    }
  }
  const auto prefix = ctx.out_dir / c.get_string("merge.name", "merged");
  merge_to_file(spec, prefix);
  ctx.write_snapshot();
  *ctx.out << "wrote " << strategy_name(spec.strategy) << " merge of " << spec.checkpoints.size()
           << " checkpoint(s) to " << prefix.string() << "\n";
  return kExitOk;
}

namespace {

std::vector<eval::PromptRecord> prompts_from(const RunConfig& c, std::uint64_t seed,
                                             const scene::LexiconSet& lexicons) {
  const std::string path = c.get_string("eval.prompts", "");
  if (!path.empty()) return eval::load_prompt_set(path);
  const auto prompt_seed = static_cast<std::uint64_t>(c.get_int("eval.prompt_seed", static_cast<std::int64_t>(seed)));
  return eval::make_prompt_set(prompt_seed, static_cast<int>(c.get_int("eval.per_dimension", 10)),
                               lexicons);
}

}  // namespace

int run_prompts(CommandContext& ctx) {
  const auto lexicons = load_lexicons(ctx.config);
  const auto prompts = prompts_from(ctx.config, ctx.seed, lexicons);
  eval::save_prompt_set(prompts, ctx.out_dir / "prompts.jsonl");
  ctx.write_snapshot();
  *ctx.out << "wrote " << prompts.size() << " prompts to " << (ctx.out_dir / "prompts.jsonl").string()
           << "\n";
  return kExitOk;
}

int run_eval(CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  if (c.get_string("checkpoint", "").empty()) throw InvalidArgument("checkpoint (--checkpoint) is required");
  const auto lexicons = load_lexicons(c);
  const UnifiedVocab vocab = make_vocab(lexicons);
  const LoadedModel model = load_model(c, vocab);
  auto prompts = prompts_from(c, ctx.seed, lexicons);
  eval::save_prompt_set(prompts, ctx.out_dir / "prompts.jsonl");

  eval::EvalConfig config;
  config.samples_per_prompt = static_cast<int>(c.get_int("eval.samples", config.samples_per_prompt));
  config.sampler = sampler_config_from(c);
  config.seed = ctx.seed;
  config.backends = c.get_list("eval.backends", config.backends);
  config.code_switch = c.get_bool("eval.code_switch", config.code_switch);
  config.workers = ctx.workers;
  const auto report = eval::run_eval_suite(model.params, model.config, vocab, lexicons,
                                           std::move(prompts), config, ctx.out_dir);
  ctx.write_snapshot();

  std::ostream& out = *ctx.out;
  out << std::fixed << std::setprecision(3);
  out << "lang";
  for (auto d : eval::kAllDimensions) out << "  " << eval::dimension_name(d);
  out << "  overall\n";
  for (const auto& [lang, score] : report.compositional) {
    out << language_tag(lang);
    for (std::size_t d = 0; d < eval::kNumDimensions; ++d) out << "  " << score.rate[d];
    out << "  " << score.overall << "\n";
  }
  for (const auto& clc : report.clc) out << "clc[" << clc.backend << "] " << clc.overall << "\n";
  for (const auto& css : report.css) {
    out << "css[" << css.backend << "] ef " << css.ef << " es " << css.es << "\n";
  }
  return kExitOk;
}

}  // namespace mtgrid::cli
