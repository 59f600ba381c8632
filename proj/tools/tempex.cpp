/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/cli.hpp"

int main(int argc, char** argv) { return tempex::cli::run(argc, argv); }
