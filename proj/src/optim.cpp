#include "carve/optim.hpp"

#include <cmath>

#include "carve/error.hpp"
#include "carve/parallel.hpp"

namespace carve {

void adam_step(const AdamConfig& cfg, std::int64_t t, std::vector<double>& params,
               const std::vector<double>& grad, std::vector<double>& m,
               std::vector<double>& v) {
    const std::size_t n = params.size();
    if (grad.size() != n || m.size() != n || v.size() != n)
        throw contract_error("adam_step: params/grad/moment sizes disagree");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    par::for_each(static_cast<std::int64_t>(n), [&](std::int64_t i) {
        const double g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    });
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size())
        throw contract_error("Adam::step: parameter count changed after construction");
    ++t_;
    adam_step(cfg_, t_, params, grad, m_, v_);
}

}  // namespace carve
