#include <string>
#include <vector>

#include "isg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return isg::run_cli(args);
}
