#include "couette/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return couette::cli::main_entry(argc, argv, std::cout, std::cerr); }
