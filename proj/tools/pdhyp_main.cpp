#include "pdhyp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return pdhyp::dispatch(argc, argv, std::cout, std::cerr); }
