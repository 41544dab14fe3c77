#include "coulomb2d/configuration.hpp"

#include <string>

#include "coulomb2d/errors.hpp"

namespace coulomb2d {

ParticleConfiguration::ParticleConfiguration(std::vector<Vec2> p) : positions(std::move(p)) {}

void ParticleConfiguration::validate() const {
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (!positions[i].finite()) throw PreconditionError("particle " + std::to_string(i) + " is not finite");
}

}  // namespace coulomb2d
