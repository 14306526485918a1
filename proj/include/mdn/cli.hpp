#pragma once

namespace mdn::cli {

// Stable exit-code contract for scripting.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

/// Entry point for the single-binary CLI (generate/train/sample/density/eval).
int run(int argc, const char* const* argv);

}  // namespace mdn::cli
