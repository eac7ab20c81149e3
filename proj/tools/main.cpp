#include <iostream>

#include "bihamil/cli.hpp"

int main(int argc, char** argv) { return bihamil::cli::run(argc, argv, std::cout, std::cerr); }
