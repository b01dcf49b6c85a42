#include <iostream>

#include "occlab/cli.hpp"

int main(int argc, char** argv) { return occlab::run_cli(argc, argv, std::cout, std::cerr); }
