#include "musep/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return musep::run(argc, argv, std::cout, std::cerr); }
