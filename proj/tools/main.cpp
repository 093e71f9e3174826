#include "spglm/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv) { return spglm::run_cli(argc, argv, std::cout, std::cerr); }
