#include <string>
#include <vector>

#include "sefa/cli.hpp"

int main(int argc, char** argv) {
  return sefa::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
