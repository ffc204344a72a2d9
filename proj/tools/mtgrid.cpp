#include <iostream>

#include "mtgrid/cli/commands.hpp"

int main(int argc, char** argv) {
  return mtgrid::cli::dispatch(argc, argv, std::cout, std::cerr);
}
