#include <string>
#include <vector>

#include "eic/config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return eic::cli_main(args);
}
