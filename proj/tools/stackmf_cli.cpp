#include <iostream>
#include <string>
#include <vector>

#include "stackmf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return stackmf::run_cli(args, std::cout, std::cerr);
}
