#include "carve/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>

namespace carve::par {

namespace {
std::atomic<int> g_max_threads{0};  // 0 = OpenMP default
std::atomic<bool> g_enabled{true};
}  // namespace

void set_max_threads(int n) {
    g_max_threads.store(std::max(0, n));
    if (n > 0) omp_set_num_threads(n);
}

int max_threads() {
    const int cap = g_max_threads.load();
    return cap > 0 ? cap : omp_get_max_threads();
}

void set_enabled(bool on) { g_enabled.store(on); }
bool enabled() { return g_enabled.load(); }

namespace detail {

void for_each_impl(std::int64_t n, void* ctx, void (*fn)(void*, std::int64_t)) {
    if (n <= 0) return;
    if (!enabled() || n == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(ctx, i);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) fn(ctx, i);
}

}  // namespace detail

}  // namespace carve::par
