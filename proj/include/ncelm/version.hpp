#pragma once

namespace ncelm {

inline constexpr char kToolVersion[] = "ncelm 0.1.0";

// Version of the plain-text run manifest written next to checkpoints.
inline constexpr int kManifestVersion = 1;

}  // namespace ncelm
