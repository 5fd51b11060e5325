#include <vector>

#include "ctxlake/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return ctxlake::run_cli(args);
}
