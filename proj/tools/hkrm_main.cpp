#include <iostream>
#include <string>
#include <vector>

#include "hkrm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hkrm::dispatch(args, std::cout, std::cerr);
}
