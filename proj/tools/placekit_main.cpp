// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#include "placekit/cli.hpp"

int main(int argc, char** argv) { return placekit::run_cli(argc, argv); }
