#include <iostream>
#include <string>
#include <vector>

#include "c3mod/interface/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return c3mod::interface::cli_dispatch(args, std::cout, std::cerr);
}
