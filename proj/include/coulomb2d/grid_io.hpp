#pragma once

// GridMeasure files: 64-byte header (magic "C2DGRID\0", version, origin x,
// origin y, cell, nx, ny, mass; 8-byte little-endian each) followed by
// nx * ny row-major little-endian doubles, plus a JSON sidecar at
// <path>.json carrying provenance.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "coulomb2d/grid.hpp"

namespace coulomb2d {

inline constexpr std::uint64_t kGridFormatVersion = 1;

void write_grid_measure(const std::filesystem::path& path, const GridMeasure& mu,
                        const nlohmann::json& provenance);

GridMeasure read_grid_measure(const std::filesystem::path& path);

/// Sidecar for a grid file; throws MissingFileError if absent.
nlohmann::json read_grid_sidecar(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace coulomb2d
