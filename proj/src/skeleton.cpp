#include "carve/skeleton.hpp"

#include <unordered_set>

#include "carve/error.hpp"

namespace carve {

void validate(const Skeleton& skel) {
    if (skel.joints.empty()) throw validation_error("skeleton: no joints");
    std::unordered_set<std::string> names;
    for (std::size_t i = 0; i < skel.joints.size(); ++i) {
        const Joint& j = skel.joints[i];
        if (!j.p.allFinite())
            throw validation_error("skeleton: joint '" + j.name +
                                   "' has a non-finite position");
        if (j.name.empty())
            throw validation_error("skeleton: joint " + std::to_string(i) +
                                   " has an empty name");
        if (!names.insert(j.name).second)
            throw validation_error("skeleton: duplicate joint name '" + j.name + "'");
    }
    const int nj = static_cast<int>(skel.joints.size());
    for (std::size_t b = 0; b < skel.bones.size(); ++b) {
        const auto& bone = skel.bones[b];
        if (bone[0] < 0 || bone[0] >= nj || bone[1] < 0 || bone[1] >= nj)
            throw validation_error("skeleton: bone " + std::to_string(b) +
                                   " references a joint outside [0, " +
                                   std::to_string(nj) + ")");
        if (bone[0] == bone[1])
            throw validation_error("skeleton: bone " + std::to_string(b) +
                                   " connects a joint to itself");
    }
}

}  // namespace carve
