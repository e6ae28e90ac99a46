#include "qthr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qthr::cli_main(argc, argv, std::cout, std::cerr); }
