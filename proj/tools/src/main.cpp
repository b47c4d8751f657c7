#include <iostream>

#include "catse_cli/cli.hpp"

int main(int argc, char** argv) {
  return catse::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
