#include <iostream>

#include "cjcrf/commands.hpp"

int main(int argc, char** argv) {
  return cjcrf::cli::run(argc, argv, std::cout, std::cerr);
}
