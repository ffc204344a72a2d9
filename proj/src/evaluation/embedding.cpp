#include "mtgrid/evaluation/embedding.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mtgrid/common/error.hpp"

namespace mtgrid::eval {

namespace {

void l2_normalize(Embedding& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

}  // namespace

Embedding HistogramMomentBackend::embed(const TokenGrid& grid, std::string_view) const {
  validate_grid(grid);
  constexpr int K = kCodebookSize;
  const int side = grid.side;
  std::array<double, K> count{}, sr{}, sc{}, srr{}, scc{}, src{};
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int k = grid.at(r, c);
      count[k] += 1.0;
      sr[k] += r;
      sc[k] += c;
      srr[k] += static_cast<double>(r) * r;
      scc[k] += static_cast<double>(c) * c;
      src[k] += static_cast<double>(r) * c;
    }
  }
  const double cells = static_cast<double>(side) * side;
  const double half = (side - 1) / 2.0;
  const double moment_scale = (side / 2.0) * (side / 2.0);
  Embedding v(kDimension, 0.0);
  for (int k = 0; k < K; ++k) {
    if (count[k] == 0.0) continue;
    const double n = count[k];
    const double mr = sr[k] / n;
    const double mc = sc[k] / n;
    v[k] = n / cells;
    v[K + 2 * k] = half > 0.0 ? (mr - half) / half : 0.0;
    v[K + 2 * k + 1] = half > 0.0 ? (mc - half) / half : 0.0;
    v[3 * K + 3 * k] = (srr[k] / n - mr * mr) / moment_scale;
    v[3 * K + 3 * k + 1] = (scc[k] / n - mc * mc) / moment_scale;
    v[3 * K + 3 * k + 2] = (src[k] / n - mr * mc) / moment_scale;
  }
  l2_normalize(v);
  return v;
}

Embedding DownsampleRawBackend::embed(const TokenGrid& grid, std::string_view) const {
  validate_grid(grid);
  const int side = grid.side;
  if (side % kBlocksPerSide != 0) {
    throw InvalidArgument("downsample-raw needs a grid side divisible by 4");
  }
  const int block = side / kBlocksPerSide;
  const double per_block = static_cast<double>(block) * block;
  Embedding v(kDimension, 0.0);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int b = (r / block) * kBlocksPerSide + c / block;
      v[static_cast<std::size_t>(b * kCodebookSize + grid.at(r, c))] += 1.0 / per_block;
    }
  }
  l2_normalize(v);
  return v;
}

ExternalBackend::ExternalBackend(std::string name,
                                 std::map<std::string, Embedding, std::less<>> vectors)
    : name_(std::move(name)), vectors_(std::move(vectors)) {
  for (const auto& [id, vec] : vectors_) {
    if (vec.empty()) throw InvalidArgument("external embedding '" + id + "' is empty");
    if (dimension_ == 0) dimension_ = vec.size();
    if (vec.size() != dimension_) {
      throw InvalidArgument("external embedding '" + id + "' has dimension " +
                            std::to_string(vec.size()) + ", expected " +
                            std::to_string(dimension_));
    }
  }
}

ExternalBackend ExternalBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  std::map<std::string, Embedding, std::less<>> vectors;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      auto id = j.at("image_id").get<std::string>();
      auto vec = j.at("vector").get<Embedding>();
      if (!vectors.emplace(id, std::move(vec)).second) {
        throw InvalidArgument("duplicate image_id '" + id + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ExternalBackend("external:" + path.filename().string(), std::move(vectors));
}

Embedding ExternalBackend::embed(const TokenGrid&, std::string_view image_id) const {
  const auto it = vectors_.find(image_id);
  if (it == vectors_.end()) {
    throw InvalidArgument("no external embedding for image '" + std::string(image_id) + "'");
  }
  return it->second;
}

std::unique_ptr<EmbeddingBackend> make_backend(std::string_view spec) {
  if (spec == "histogram-moment") return std::make_unique<HistogramMomentBackend>();
  if (spec == "downsample-raw") return std::make_unique<DownsampleRawBackend>();
  constexpr std::string_view prefix = "external:";
  if (spec.substr(0, prefix.size()) == prefix) {
    return std::make_unique<ExternalBackend>(ExternalBackend::load(spec.substr(prefix.size())));
  }
  throw InvalidArgument("unknown embedding backend '" + std::string(spec) + "'");
}

}  // namespace mtgrid::eval
