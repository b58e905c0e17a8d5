#include <string>
#include <vector>

#include "ddn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ddn::cli::run(args);
}
