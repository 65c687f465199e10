#include <iostream>
#include <string>
#include <vector>

#include "rvar/cli.hpp"

int main(int argc, char** argv) {
  return rvar::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
