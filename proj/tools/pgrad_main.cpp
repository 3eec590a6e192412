#include <string>
#include <vector>

#include "pgrad/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pgrad::run_cli(args);
}
