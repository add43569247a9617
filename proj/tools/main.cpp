#include <vector>

#include "lanecal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lanecal::cli::run(args);
}
