#include <iostream>

#include "mapfluct/cli.hpp"

int main(int argc, char** argv) { return mapfluct::cli::run(argc, argv, std::cout, std::cerr); }
