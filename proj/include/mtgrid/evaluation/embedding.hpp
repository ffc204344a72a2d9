#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mtgrid/tokenizer/token_grid.hpp"

namespace mtgrid::eval {

using Embedding = std::vector<double>;

// Maps an image to a fixed-size vector. Implementations are deterministic.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  // image_id is only consulted by backends that look vectors up by id.
  virtual Embedding embed(const TokenGrid& grid, std::string_view image_id) const = 0;
};

// Layout of the histogram-moment vector (d = 6K = 96 for K = 16), per color c:
//   [c]        fraction of cells with color c
//   [K + 2c]   centroid row, [K + 2c + 1] centroid col, both mapped to [-1, 1]
//   [3K + 3c]  row variance, [3K + 3c + 1] col variance, [3K + 3c + 2] covariance,
//              each divided by (side / 2)^2
// Colors that do not occur contribute zeros. The vector is L2-normalized.
class HistogramMomentBackend final : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDimension = 6 * kCodebookSize;
  std::string name() const override { return "histogram-moment"; }
  std::size_t dimension() const override { return kDimension; }
  Embedding embed(const TokenGrid& grid, std::string_view image_id) const override;
};

// Color one-hots average-pooled over a 4 x 4 arrangement of blocks; entry
// (block * K + color) is the fraction of the block's cells with that color.
// d = 16 K = 256, L2-normalized.
class DownsampleRawBackend final : public EmbeddingBackend {
 public:
  static constexpr int kBlocksPerSide = 4;
  static constexpr std::size_t kDimension =
      static_cast<std::size_t>(kBlocksPerSide * kBlocksPerSide * kCodebookSize);
  std::string name() const override { return "downsample-raw"; }
  std::size_t dimension() const override { return kDimension; }
  Embedding embed(const TokenGrid& grid, std::string_view image_id) const override;
};

// Vectors supplied by an external encoder, keyed by image id. The file is
// JSONL with one {"image_id": ..., "vector": [...]} object per line.
class ExternalBackend final : public EmbeddingBackend {
 public:
  ExternalBackend(std::string name, std::map<std::string, Embedding, std::less<>> vectors);
  // Throws IoError on unreadable files and InvalidArgument on malformed lines,
  // duplicate ids or vectors of differing dimension.
  static ExternalBackend load(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  std::size_t dimension() const override { return dimension_; }
  // Throws InvalidArgument when the id is unknown.
  Embedding embed(const TokenGrid& grid, std::string_view image_id) const override;

 private:
  std::string name_;
  std::map<std::string, Embedding, std::less<>> vectors_;
  std::size_t dimension_ = 0;
};

// "histogram-moment", "downsample-raw" or "external:<path>".
std::unique_ptr<EmbeddingBackend> make_backend(std::string_view spec);

}  // namespace mtgrid::eval
