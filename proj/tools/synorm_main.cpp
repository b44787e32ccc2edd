#include <iostream>

#include "synorm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return synorm::cli::run(args, std::cout, std::cerr);
}
