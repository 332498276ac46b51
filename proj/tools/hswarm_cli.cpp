#include <iostream>

#include "hswarm/cli.hpp"

int main(int argc, char** argv) { return hswarm::run_cli(argc, argv, std::cout, std::cerr); }
