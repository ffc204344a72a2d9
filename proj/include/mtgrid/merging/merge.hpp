#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtgrid/model/parameters.hpp"
#include "mtgrid/training/checkpoint.hpp"

namespace mtgrid {

enum class MergeStrategy { sma, ema, wma };

std::string_view strategy_name(MergeStrategy strategy);
MergeStrategy parse_strategy(std::string_view name);  // throws InvalidArgument

struct MergeSpec {
  std::vector<std::filesystem::path> checkpoints;  // trajectory order M_1..M_N
  MergeStrategy strategy = MergeStrategy::sma;
  double ema_alpha = 0.5;
  std::vector<double> wma_weights;  // empty: w_i = i
};

nlohmann::json to_json(const MergeSpec& spec);

// alpha_i = w_i / sum_j w_j. Throws InvalidArgument for negative weights or
// a non-positive sum.
std::vector<double> normalize_weights(const std::vector<double>& weights);

// Coefficient of each checkpoint in the EMA recursion
// M(1) = M_1, M(i) = alpha M_i + (1 - alpha) M(i-1).
std::vector<double> ema_coefficients(std::size_t n, double alpha);

// Coefficients of every checkpoint under a spec with n checkpoints.
std::vector<double> merge_coefficients(const MergeSpec& spec, std::size_t n);

// In-memory merges. All tables must share names and shapes; a mismatch
// throws InvalidArgument naming the tensor. Sums run in double precision.
Parameters merge_sma(const std::vector<Parameters>& checkpoints);
Parameters merge_ema(const std::vector<Parameters>& checkpoints, double alpha);
Parameters merge_wma(const std::vector<Parameters>& checkpoints, const std::vector<double>& weights);
Parameters merge_weighted(const std::vector<Parameters>& checkpoints,
                          const std::vector<double>& coefficients);

// Streams checkpoints from disk (one loaded at a time plus a double
// accumulator) and writes a model-only checkpoint whose manifest metadata
// records the spec. Optimizer state is never merged.
Checkpoint merge_checkpoints(const MergeSpec& spec);
void merge_to_file(const MergeSpec& spec, const std::filesystem::path& out_prefix);

}  // namespace mtgrid
