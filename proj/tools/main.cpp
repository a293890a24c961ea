#include <iostream>

#include "stabkit/cli.hpp"

int main(int argc, char** argv) {
  return stabkit::run_cli(argc, argv, std::cout, std::cerr);
}
