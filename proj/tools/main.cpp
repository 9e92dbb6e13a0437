#include <iostream>

#include "svytrans/cli.hpp"

int main(int argc, char** argv) { return svytrans::cli::run(argc, argv, std::cout, std::cerr); }
