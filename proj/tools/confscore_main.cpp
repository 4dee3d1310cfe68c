#include <iostream>

#include "confscore/cli.hpp"

int main(int argc, char** argv) {
  return confscore::cli::run(argc, argv, std::cout, std::cerr);
}
