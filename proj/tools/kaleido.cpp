#include "kaleido/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return kaleido::cli_main(argc, argv, std::cout, std::cerr); }
