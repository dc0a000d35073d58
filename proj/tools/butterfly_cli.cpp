#include "butterfly/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return butterfly::cli::run_cli(argc, argv, std::cout, std::cerr);
}
