#include <cstdlib>
#include <iostream>

#include "gridloss_cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> seed;
  if (const char* s = std::getenv("GRIDLOSS_SEED")) seed = s;
  return gridloss::cli::run_cli(args, std::cout, std::cerr, seed);
}
