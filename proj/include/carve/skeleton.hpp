#pragma once

#include <array>
#include <string>
#include <vector>

#include "carve/math.hpp"

namespace carve {

struct Joint {
    std::string name;
    Vec3 p{0, 0, 0};
};

// Named joints plus bone connectivity (pairs of joint indices). Joint order
// is significant: it selects the drawing color in pose images.
struct Skeleton {
    std::vector<Joint> joints;
    std::vector<std::array<int, 2>> bones;
};

// Throws validation_error: at least one joint, finite positions, unique
// names, bone indices in range and non-self.
void validate(const Skeleton& skel);

}  // namespace carve
