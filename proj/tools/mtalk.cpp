#include <iostream>

#include "mtalk/cli.hpp"

int main(int argc, char** argv) {
  return mtalk::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
