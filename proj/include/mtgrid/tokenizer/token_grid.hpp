#pragma once

#include <cstdint>
#include <vector>

namespace mtgrid {

// Palette index of one image cell. Values live in [0, kCodebookSize).
using PaletteIndex = std::uint8_t;

inline constexpr int kCodebookSize = 16;
inline constexpr int kGridSide = 16;

// Square grid of palette indices, row-major.
struct TokenGrid {
  int side = kGridSide;
  std::vector<PaletteIndex> tokens;

  TokenGrid() : tokens(static_cast<std::size_t>(kGridSide * kGridSide), 0) {}
  TokenGrid(int side_cells, PaletteIndex fill)
      : side(side_cells),
        tokens(static_cast<std::size_t>(side_cells * side_cells), fill) {}

  PaletteIndex& at(int row, int col) {
    return tokens[static_cast<std::size_t>(row * side + col)];
  }
  PaletteIndex at(int row, int col) const {
    return tokens[static_cast<std::size_t>(row * side + col)];
  }
  int cell_count() const { return side * side; }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

// Throws InvalidArgument if |tokens| != side^2 or any value >= K.
void validate_grid(const TokenGrid& grid);

}  // namespace mtgrid
