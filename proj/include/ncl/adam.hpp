#ifndef NCL_ADAM_HPP
#define NCL_ADAM_HPP

#include <cmath>
#include <cstdint>

#include "ncl/error.hpp"
#include "ncl/nn.hpp"

namespace ncl {

struct AdamState {
    ParamSet m;
    ParamSet v;
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_model(const ModelState& model, double lr = 1e-3, double beta1 = 0.9,
                               double beta2 = 0.999, double eps = 1e-8) {
        return {zeros_like(model.params), zeros_like(model.params), 0, lr, beta1, beta2, eps};
    }

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update of `model` in place.
///
/// Gradients are scanned for non-finite values before anything is modified,
/// so a diverged step leaves both model and optimizer untouched.
inline void adam_step(ModelState& model, const ParamSet& grads, AdamState& opt) {
    if (!same_structure(model.params, grads) || !same_structure(model.params, opt.m) ||
        !same_structure(model.params, opt.v))
        throw InvalidInput("gradient structure does not match model parameters");
    for (std::size_t l = 0; l < grads.size(); ++l) {
        auto finite = [](const std::vector<double>& v) {
            for (double x : v)
                if (!std::isfinite(x)) return false;
            return true;
        };
        if (!finite(grads[l].weights) || !finite(grads[l].bias))
            throw TrainingDiverged("non-finite gradient in layer " + std::to_string(l), -1, -1, -1,
                                   static_cast<long>(l));
    }
    ++opt.step;
    const double t = static_cast<double>(opt.step);
    const double c1 = 1.0 - std::pow(opt.beta1, t);
    const double c2 = 1.0 - std::pow(opt.beta2, t);
    auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            w[i] -= opt.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
        }
    };
    for (std::size_t l = 0; l < grads.size(); ++l) {
        update(model.params[l].weights, grads[l].weights, opt.m[l].weights, opt.v[l].weights);
        update(model.params[l].bias, grads[l].bias, opt.m[l].bias, opt.v[l].bias);
    }
}

}  // namespace ncl

#endif  // NCL_ADAM_HPP
