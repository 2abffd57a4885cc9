#pragma once

#include <string>

#include "rgan/market_sim.hpp"

namespace rgan {

/// Binary layout: "RGPN1", then d, N, B, seed as little-endian uint64, then
/// float64 draws in (path, step, asset) order.
void write_increments(const std::string& path, const NoiseIncrements& inc);
NoiseIncrements read_increments(const std::string& path);

/// Columns t, path_id, S_1..S_d; one row per (path, time point).
void write_paths_csv(const std::string& path, const PathBatch& paths, const TimeGrid& grid,
                     std::size_t max_paths = static_cast<std::size_t>(-1));

}  // namespace rgan
