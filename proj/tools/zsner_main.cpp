#include <string>
#include <vector>

#include "zsner/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zsner::cli::dispatch(args);
}
