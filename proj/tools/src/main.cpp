#include <iostream>
#include <string>
#include <vector>

#include "grids_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return grids::cli::run(args, std::cout, std::cerr);
}
