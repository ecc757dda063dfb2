#include <iostream>
#include <string>
#include <vector>

#include "splinegp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return splinegp::cli::run(args, std::cout, std::cerr);
}
