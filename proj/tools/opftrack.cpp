#include <iostream>

#include "opftrack/cli.hpp"

int main(int argc, char** argv) { return opftrack::cli::run(argc, argv, std::cout, std::cerr); }
