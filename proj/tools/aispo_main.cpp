#include <iostream>
#include <string>
#include <vector>

#include "aispo/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return aispo::run_cli(args, std::cout, std::cerr);
}
