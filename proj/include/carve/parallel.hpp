#pragma once

#include <cstdint>
#include <vector>

// Parallel building blocks with a determinism contract: every helper here
// produces bit-identical results for any thread count, including 1. Scalar
// reductions are computed as fixed-size block partials combined in block
// order, so the floating-point addition order never depends on scheduling.

namespace carve::par {

// Caps OpenMP workers for all kernels (also settable via the CLI --threads).
void set_max_threads(int n);
int max_threads();

// Globally disables OpenMP dispatch; kernels fall back to their serial path.
// Used by tests and the benchmark to compare the two implementations.
void set_enabled(bool on);
bool enabled();

namespace detail {
void for_each_impl(std::int64_t n, void* ctx, void (*fn)(void*, std::int64_t));
}

// Parallel loop over [0, n). The body must only write state owned by index i.
template <class F>
void for_each(std::int64_t n, F&& f) {
    detail::for_each_impl(n, &f, [](void* ctx, std::int64_t i) {
        (*static_cast<F*>(ctx))(i);
    });
}

template <class F>
void for_each_serial(std::int64_t n, F&& f) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
}

inline constexpr std::int64_t kBlock = 4096;

// Deterministic sum of term(i) over [0, n): per-block partial sums (block
// size fixed, independent of thread count) combined serially in block order.
template <class F>
double block_sum(std::int64_t n, F&& term) {
    if (n <= 0) return 0.0;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
    for_each(nblocks, [&](std::int64_t b) {
        const std::int64_t lo = b * kBlock;
        const std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) acc += term(i);
        partial[static_cast<std::size_t>(b)] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

template <class F>
double block_sum_serial(std::int64_t n, F&& term) {
    if (n <= 0) return 0.0;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    double total = 0.0;
    for (std::int64_t b = 0; b < nblocks; ++b) {
        const std::int64_t lo = b * kBlock;
        const std::int64_t hi = lo + kBlock < n ? lo + kBlock : n;
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) acc += term(i);
        total += acc;
    }
    return total;
}

}  // namespace carve::par
