#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Content hashing for reproducibility reports: FNV-1a (64-bit), printed as
// 16 hex digits. Not cryptographic; collisions are irrelevant for comparing
// two runs of the same pipeline.

namespace carve {

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t h);

// Hash of a file's bytes. Throws io_error if the file cannot be read.
std::string hash_file(const std::string& path);

}  // namespace carve
