#include "xshift/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return xshift::cli::main(args, std::getenv("XSHIFT_SEED"), std::cout, std::cerr);
}
