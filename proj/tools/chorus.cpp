#include <iostream>
#include <string>
#include <vector>

#include "chorus/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return chorus::dispatch(args, std::cout, std::cerr);
}
