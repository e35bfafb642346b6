#include <iostream>

#include "atomint/cli.hpp"

int main(int argc, char** argv)
{
    return atomint::run_cli(argc, argv, std::cout, std::cerr);
}
