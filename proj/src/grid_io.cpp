#include "coulomb2d/grid_io.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "coulomb2d/binary_io.hpp"
#include "coulomb2d/errors.hpp"

namespace coulomb2d {

namespace {
constexpr std::array<char, 8> kMagic = {'C', '2', 'D', 'G', 'R', 'I', 'D', '\0'};
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_grid_measure(const std::filesystem::path& path, const GridMeasure& mu,
                        const nlohmann::json& provenance) {
  const GridGeometry& g = mu.geometry();
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    io::put_u64(os, kGridFormatVersion);
    io::put_f64(os, g.origin.x);
    io::put_f64(os, g.origin.y);
    io::put_f64(os, g.cell);
    io::put_u64(os, g.nx);
    io::put_u64(os, g.ny);
    io::put_f64(os, mu.mass());
    for (double d : mu.density()) io::put_f64(os, d);
    if (!os) throw FormatError("write failed for " + path.string());
  }
  nlohmann::json side = provenance;
  side["format"] = "coulomb2d-grid";
  side["version"] = kGridFormatVersion;
  side["signed"] = mu.is_signed();
  side["geometry"] = {{"origin", {g.origin.x, g.origin.y}}, {"cell", g.cell}, {"nx", g.nx}, {"ny", g.ny}};
  side["mass"] = mu.mass();
  std::ofstream js(sidecar_path(path), std::ios::trunc);
  js << side.dump(2) << '\n';
}

GridMeasure read_grid_measure(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFileError("missing grid file " + path.string());
  std::ifstream is(path, std::ios::binary);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw FormatError(path.string() + " is not a grid measure file");
  if (io::get_u64(is) != kGridFormatVersion) throw FormatError("unsupported grid format version");
  GridGeometry g;
  g.origin.x = io::get_f64(is);
  g.origin.y = io::get_f64(is);
  g.cell = io::get_f64(is);
  g.nx = io::get_u64(is);
  g.ny = io::get_u64(is);
  const double mass = io::get_f64(is);
  if (!(g.cell > 0.0) || g.nx == 0 || g.ny == 0 || g.nx > (1u << 16) || g.ny > (1u << 16))
    throw FormatError("corrupt grid header in " + path.string());
  std::vector<double> density(g.size());
  bool negative = false;
  for (double& d : density) {
    d = io::get_f64(is);
    negative = negative || d < 0.0;
  }
  GridMeasure mu(g, std::move(density), negative);
  if (std::fabs(mu.mass() - mass) > 1e-12 * std::max(1.0, std::fabs(mass)))
    throw FormatError("stored mass does not match density in " + path.string());
  return mu;
}

nlohmann::json read_grid_sidecar(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) throw MissingFileError("missing sidecar " + side.string());
  std::ifstream is(side);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed sidecar " + side.string() + ": " + e.what());
  }
}

}  // namespace coulomb2d
