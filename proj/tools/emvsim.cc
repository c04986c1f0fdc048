#include <iostream>
#include <string>
#include <vector>

#include "emvsim/runner.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return emvsim::run_cli(args, std::cout, std::cerr);
}
