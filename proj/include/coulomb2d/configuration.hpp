#pragma once

#include <cstddef>
#include <vector>

#include "coulomb2d/vec2.hpp"

namespace coulomb2d {

/// N planar positions: the state of the gas.
struct ParticleConfiguration {
  std::vector<Vec2> positions;

  ParticleConfiguration() = default;
  explicit ParticleConfiguration(std::vector<Vec2> p);

  std::size_t n() const { return positions.size(); }
  const Vec2& operator[](std::size_t i) const { return positions[i]; }
  Vec2& operator[](std::size_t i) { return positions[i]; }

  /// Throws PreconditionError on non-finite coordinates.
  void validate() const;
};

}  // namespace coulomb2d
