// Writes the self-contained pipeline input bundle (meshes, view images,
// skeleton, config.toml) used by the CLI smoke test. Usage:
//   carve_fixture <output-dir>

#include <exception>
#include <iostream>

#include "support/assets.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: carve_fixture <output-dir>\n";
        return 2;
    }
    try {
        const std::string config = testassets::write_fixture(argv[1]);
        std::cout << config << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "fixture generation failed: " << e.what() << "\n";
        return 1;
    }
}
