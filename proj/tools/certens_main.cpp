#include <iostream>

#include "certens/cli.hpp"

int main(int argc, char** argv)
{
    return certens::cli::run(argc, argv, std::cout, std::cerr);
}
