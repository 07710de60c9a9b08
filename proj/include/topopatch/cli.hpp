#pragma once

namespace topopatch {

// Exit codes: 0 ok, 1 some case failed, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCaseFailure = 1;
inline constexpr int kExitUsage = 2;

// Environment variable that supplies the output directory when none is given.
inline constexpr const char* kOutputEnv = "TOPOPATCH_OUTPUT_DIR";

int run_cli(int argc, char** argv);

}  // namespace topopatch
