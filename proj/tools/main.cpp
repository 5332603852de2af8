#include <iostream>

#include "dirforge/cli.hpp"

int main(int argc, char** argv) { return dirforge::run_cli(argc, argv, std::cout, std::cerr); }
