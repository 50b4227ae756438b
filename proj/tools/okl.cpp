#include <iostream>

#include "okl/cli.hpp"

int main(int argc, char** argv) { return okl::run_cli(argc, argv, std::cout, std::cerr); }
