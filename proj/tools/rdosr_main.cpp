#include <iostream>
#include <string>
#include <vector>

#include "rdosr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rdosr::cli::run(args, std::cout, std::cerr);
}
