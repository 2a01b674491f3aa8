#include "qdacode/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qdacode::run_cli(argc, argv, std::cout, std::cerr); }
