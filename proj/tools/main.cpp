#include <iostream>
#include <string>
#include <vector>

#include "metastim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return metastim::run_cli(args, std::cout);
}
