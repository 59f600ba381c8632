/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <iosfwd>

namespace tempex::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Parses the command line and runs one command. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace tempex::cli
