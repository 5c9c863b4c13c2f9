#include <iostream>

#include "ulfspin/cli.hpp"

int main(int argc, char** argv) { return ulfspin::run_cli(argc, argv, std::cout, std::cerr); }
