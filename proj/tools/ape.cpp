// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return ape::cli::main(argc, argv); }
