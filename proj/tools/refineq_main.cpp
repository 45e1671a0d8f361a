#include <string>
#include <vector>

#include "refineq/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return refineq::run_cli(args);
}
