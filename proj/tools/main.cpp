#include <iostream>

#include "seatsim/cli.hpp"

int main(int argc, char** argv) {
  return seatsim::cli::run_cli(argc, argv, std::cout, std::cerr);
}
