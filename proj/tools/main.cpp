#include <iostream>

#include "lassoflex/cli.hpp"

int main(int argc, char** argv) { return lfn::cli::run(argc, argv, std::cout, std::cerr); }
