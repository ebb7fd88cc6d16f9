#include <string>
#include <vector>

#include "mrvr/cli.hpp"

int main(int argc, char** argv) {
  return mrvr::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
