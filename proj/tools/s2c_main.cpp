#include <iostream>
#include <string>
#include <vector>

#include "s2c/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return s2c::cli::run_cli(args, std::cout, std::cerr);
}
