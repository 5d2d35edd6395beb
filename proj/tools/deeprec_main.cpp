#include <iostream>
#include <string>
#include <vector>

#include "deeprec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return deeprec::run_subcommand(args, std::cout, std::cerr);
}
