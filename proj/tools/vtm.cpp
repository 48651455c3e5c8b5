// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "vtm/cli.hpp"

int main(int argc, char** argv) { return vtm::cli::run(argc, argv, std::cerr); }
