#pragma once

#include <vector>

namespace rsflow {

using Tokens = std::vector<int>;

}  // namespace rsflow
