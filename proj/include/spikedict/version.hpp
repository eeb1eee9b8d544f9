#pragma once

namespace spikedict {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spikedict
