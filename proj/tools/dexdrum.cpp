#include <string>
#include <vector>

#include "dexdrum/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dexdrum::cli::dispatch(args);
}
