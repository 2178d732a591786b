#include <iostream>

#include "misspec/cli.hpp"

int main(int argc, char** argv) { return misspec::run_cli(argc, argv, std::cout, std::cerr); }
