#pragma once

namespace latomo::cli {

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kRuntime = 2;
inline constexpr int kProtocol = 3;

/// Entry point shared by the executable and in-process tests.
int run(int argc, const char* const* argv);

}  // namespace latomo::cli
