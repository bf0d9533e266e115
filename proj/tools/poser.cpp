#include <iostream>

#include "poser/cli.hpp"

int main(int argc, char** argv) { return poser::run_cli(argc, argv, std::cout, std::cerr); }
