#pragma once

#include <cstdint>
#include <vector>

// Adam with bias correction, specialized to flat double arrays. Deterministic:
// the update is elementwise, so results do not depend on evaluation order.

namespace carve {

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    Adam() = default;
    Adam(std::size_t n, const AdamConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }
    std::size_t size() const { return m_.size(); }

    // One update: params[i] -= lr * m_hat / (sqrt(v_hat) + eps).
    // A coordinate with zero gradient since construction stays exactly put
    // (moments remain zero, and 0/(0+eps) is zero).
    void step(std::vector<double>& params, const std::vector<double>& grad);

  private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::int64_t t_ = 0;
};

// Single free-function step used where no persistent optimizer is wanted;
// `m`, `v` are the caller-owned moment buffers and `t` the 1-based step.
void adam_step(const AdamConfig& cfg, std::int64_t t, std::vector<double>& params,
               const std::vector<double>& grad, std::vector<double>& m,
               std::vector<double>& v);

}  // namespace carve
