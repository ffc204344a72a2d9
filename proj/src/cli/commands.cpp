#include "mtgrid/cli/commands.hpp"

#include <functional>
#include <iostream>
#include <optional>
#include <vector>

#include "CLI11.hpp"
#include "mtgrid/cli/context.hpp"
#include "mtgrid/common/atomic_file.hpp"
#include "mtgrid/common/error.hpp"

namespace mtgrid::cli {
namespace {

struct SubcommandSpec {
  const char* name;
  const char* help;
  int (*run)(CommandContext&);
};

constexpr SubcommandSpec kSubcommands[] = {
    {"dataset", "Generate a multilingual synthetic caption/grid shard", run_dataset},
    {"train", "Run curriculum stages and write checkpoints", run_train},
    {"generate", "Generate grids from a prompt", run_generate},
    {"inpaint", "Regenerate a rectangular region of a grid", run_inpaint},
    {"extrapolate", "Extend a grid to the left or right", run_extrapolate},
    {"merge", "Average checkpoints (sma, ema, wma)", run_merge},
    {"eval", "Run the multilingual evaluation suite", run_eval},
    {"prompts", "Write an evaluation prompt set", run_prompts},
};

// Command-line flags that map onto config keys.
struct FlagBinding {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagBinding>& flag_bindings(const std::string& command) {
  static const std::vector<FlagBinding> none;
  static const std::vector<FlagBinding> generate{
      {"--checkpoint", "checkpoint", "Checkpoint prefix or manifest path"},
      {"--prompt", "prompt", "Prompt text"},
      {"--language", "language", "Prompt language tag"},
      {"--count", "count", "Number of grids to generate"}};
  static const std::vector<FlagBinding> inpaint{
      {"--checkpoint", "checkpoint", "Checkpoint prefix or manifest path"},
      {"--prompt", "prompt", "Prompt text"},
      {"--language", "language", "Prompt language tag"},
      {"--input", "input", "JSONL file whose first record holds the source grid"},
      {"--region", "region", "Rectangle row0,col0,row1,col1 (half-open) to regenerate"}};
  static const std::vector<FlagBinding> extrapolate{
      {"--checkpoint", "checkpoint", "Checkpoint prefix or manifest path"},
      {"--prompt", "prompt", "Prompt text"},
      {"--language", "language", "Prompt language tag"},
      {"--input", "input", "JSONL file whose first record holds the source grid"},
      {"--direction", "direction", "left or right"},
      {"--cols", "cols", "Number of new columns"}};
  static const std::vector<FlagBinding> merge{
      {"--strategy", "merge.strategy", "sma, ema or wma"},
      {"--alpha", "merge.alpha", "EMA coefficient in (0, 1]"},
      {"--weights", "merge.weights", "Comma-separated WMA weights (default 1..N)"}};
  static const std::vector<FlagBinding> eval{
      {"--checkpoint", "checkpoint", "Checkpoint prefix or manifest path ('random' for init)"},
      {"--prompts", "eval.prompts", "Prompt set JSONL"},
      {"--backend", "eval.backends", "Embedding backends, comma-separated"}};
  static const std::vector<FlagBinding> train{
      {"--data", "train.data", "Dataset JSONL"},
      {"--stages", "train.stages", "Comma-separated stage names to run"},
      {"--resume", "train.resume", "Stage checkpoint to resume from"}};
  static const std::vector<FlagBinding> dataset{
      {"--samples", "data.samples", "Number of records"}};
  if (command == "generate") return generate;
  if (command == "inpaint") return inpaint;
  if (command == "extrapolate") return extrapolate;
  if (command == "merge") return merge;
  if (command == "eval") return eval;
  if (command == "train") return train;
  if (command == "dataset") return dataset;
  return none;
}

struct ParsedArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> flags;  // key, value
};

}  // namespace

void CommandContext::write_snapshot() const {
  write_file_atomically(out_dir / "resolved_config.toml",
                        "# mtgrid " + command + "\n" + config.serialize());
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilingual masked-token text-to-grid pipeline", "mtgrid"};
  app.require_subcommand(1);
  app.fallthrough(false);

  ParsedArgs args;
  std::vector<std::string> flag_values(16);
  std::map<std::string, CLI::App*> subs;
  for (const auto& spec : kSubcommands) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    sub->add_option("-c,--config", args.config_path, "TOML-style config file");
    sub->add_option("-s,--set", args.overrides, "Override a config key: section.key=value");
    sub->add_option("-o,--out", args.out_dir, "Run directory for all outputs");
    sub->add_option("--seed", args.seed, "Global seed");
    sub->add_option("--workers", args.workers, "Worker threads (default 1, bit-exact)")
        ->check(CLI::PositiveNumber);
    const auto& bindings = flag_bindings(spec.name);
    for (std::size_t i = 0; i < bindings.size(); ++i) {
      sub->add_option(bindings[i].flag, flag_values[i], bindings[i].help);
    }
    if (std::string(spec.name) == "merge") {
      sub->add_option("checkpoints", args.positional, "Checkpoints in trajectory order");
    }
    subs[spec.name] = sub;
  }

  std::vector<std::string> arguments;
  for (int i = argc - 1; i > 0; --i) arguments.emplace_back(argv[i]);
  try {
    app.parse(arguments);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  CommandContext ctx;
  ctx.command = command;
  ctx.out = &out;
  ctx.log = &err;
  try {
    if (!args.config_path.empty()) ctx.config = RunConfig::load(args.config_path);
    const auto& bindings = flag_bindings(command);
    for (std::size_t i = 0; i < bindings.size(); ++i) {
      if (chosen->count(bindings[i].flag) > 0) ctx.config.set(bindings[i].key, flag_values[i]);
    }
    if (!args.positional.empty()) {
      std::string joined;
      for (const auto& p : args.positional) joined += (joined.empty() ? "" : ",") + p;
      ctx.config.set("merge.checkpoints", joined);
    }
    if (args.seed) ctx.config.set("seed", std::to_string(*args.seed));
    if (args.workers) ctx.config.set("workers", std::to_string(*args.workers));
    if (!args.out_dir.empty()) ctx.config.set("out", args.out_dir);
    for (const auto& o : args.overrides) ctx.config.apply_override(o);

    ctx.seed = static_cast<std::uint64_t>(ctx.config.get_int("seed", 0));
    ctx.workers = static_cast<int>(ctx.config.get_int("workers", 1));
    if (ctx.workers < 1) throw InvalidArgument("workers must be >= 1");
    ctx.out_dir = ctx.config.get_string("out", "runs/" + command);
    std::filesystem::create_directories(ctx.out_dir);
    for (const auto& spec : kSubcommands) {
      if (command == spec.name) return spec.run(ctx);
    }
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: invalid-argument: " << e.what() << "\n";
  } catch (const IoError& e) {
    err << "error: io: " << e.what() << "\n";
  } catch (const NumericError& e) {
    err << "error: numeric: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: runtime: " << e.what() << "\n";
  }
  return kExitFailure;
}

}  // namespace mtgrid::cli
