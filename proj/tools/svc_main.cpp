#include <iostream>

#include "svc/cli.hpp"

int main(int argc, char** argv) { return svc::run_cli(argc, argv, std::cout, std::cerr); }
