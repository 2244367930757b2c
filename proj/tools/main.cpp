#include <iostream>
#include <string>
#include <vector>

#include "pxbh/cli.hpp"

int main(int argc, char** argv) {
    return pxbh::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
