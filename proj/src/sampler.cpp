#include "rsflow/sampler.hpp"

#include <cmath>

namespace rsflow {

void SamplerConfig::validate() const {
    if (nfe < 1) throw ConfigError("sampler.nfe: must be >= 1, got " + std::to_string(nfe));
    if (!std::isfinite(cfg_weight)) throw ConfigError("sampler.cfg_weight: must be finite");
}

}  // namespace rsflow
