#include <iostream>

#include "dqkd/app.hpp"

int main(int argc, char** argv)
{
    return dqkd::run_cli(argc, argv, std::cout, std::cerr);
}
