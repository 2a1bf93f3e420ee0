#include <iostream>
#include <string>
#include <vector>

#include "fnpc/cli.h"

int main(int argc, char** argv) {
  return fnpc::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
