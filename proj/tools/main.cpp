#include <iostream>

#include "qwait/cli.hpp"

int main(int argc, char** argv) {
  return qwait::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
