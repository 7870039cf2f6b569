#include <iostream>

#include "agentplan/cli.hpp"

int main(int argc, char** argv) { return agentplan::run_cli(argc, argv, std::cout, std::cerr); }
