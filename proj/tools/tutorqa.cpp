#include <iostream>

#include "tutorqa/cli.hpp"

int main(int argc, char** argv) {
  return tutorqa::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
