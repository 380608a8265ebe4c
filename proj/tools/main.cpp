#include <vector>

#include "factorsv/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fsv::cli_dispatch(args);
}
