#include <iostream>
#include <string>
#include <vector>

#include "qgibbs/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return qgibbs::cli::run_cli(args, std::cout, std::cerr);
}
