#include "carve/rng.hpp"

#include <cmath>

namespace carve {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller on (0,1] x [0,1): u1 never zero so log stays finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

Rng Rng::derive(std::string_view tag) const {
    // FNV-1a over the tag, folded into the current state; the child is a
    // fresh splitmix stream so parent draws do not perturb it.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return Rng(state_ ^ h);
}

}  // namespace carve
