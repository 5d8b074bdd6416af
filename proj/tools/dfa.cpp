#include "dfa/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return dfa::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
