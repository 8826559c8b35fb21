#include <iostream>

#include "dppvfx/cli.hpp"

int main(int argc, char** argv) { return dppvfx::run_cli(argc, argv, std::cout, std::cerr); }
