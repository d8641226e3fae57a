// Copyright 2026 The sppg-discovery Authors
//
// Licensed under the Apache License, Version 2.0

#include <iostream>
#include <string>
#include <vector>

#include "sppg/pipeline/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sppg::pipeline::cli_main(args, std::cout, std::cerr);
}
