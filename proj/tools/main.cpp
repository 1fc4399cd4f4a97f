#include <string>
#include <vector>

#include "zrnmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zrnmt::run(args);
}
