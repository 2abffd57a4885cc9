#pragma once

#include <string>

#include "rgan/network.hpp"

namespace rgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary: "RGCK", version, network spec, named slices, values, Adam m and v,
/// Adam step. Integers are little-endian uint64 unless noted.
void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

}  // namespace rgan
