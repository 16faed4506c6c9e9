#include <iostream>

#include "drate_cli/cli.hpp"

int main(int argc, char** argv) { return drate::cli::run_cli(argc, argv, std::cout, std::cerr); }
