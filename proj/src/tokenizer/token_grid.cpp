#include "mtgrid/tokenizer/token_grid.hpp"

#include <string>

#include "mtgrid/common/error.hpp"

namespace mtgrid {

void validate_grid(const TokenGrid& grid) {
  if (grid.side <= 0 ||
      grid.tokens.size() != static_cast<std::size_t>(grid.side * grid.side)) {
    throw InvalidArgument("token grid has " + std::to_string(grid.tokens.size()) +
                          " cells, expected side^2 for side " +
                          std::to_string(grid.side));
  }
  for (std::size_t i = 0; i < grid.tokens.size(); ++i) {
    if (grid.tokens[i] >= kCodebookSize) {
      throw InvalidArgument("token grid cell " + std::to_string(i) +
                            " holds palette index " +
                            std::to_string(grid.tokens[i]) + " >= K");
    }
  }
}

}  // namespace mtgrid
