// Copyright 2026 The neuromerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "neuromerge/cli.hpp"

int main(int argc, char** argv) { return neuromerge::cli::run(argc, argv); }
