#include <iostream>

#include "dsheat/cli.hpp"

int main(int argc, char** argv) { return dsheat::cli::run(argc, argv, std::cout, std::cerr); }
