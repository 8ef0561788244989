#include <iostream>

#include "isocrit/cli.hpp"

int main(int argc, char** argv) {
  return isocrit::cli::run(argc, argv, std::cout, std::cerr);
}
