#include <iostream>

#include "multicam/cli/cli.hpp"

int main(int argc, char **argv) {
  return multicam::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
