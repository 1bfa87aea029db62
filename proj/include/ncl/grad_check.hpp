#ifndef NCL_GRAD_CHECK_HPP
#define NCL_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ncl/nn.hpp"

namespace ncl {

struct GradCheckReport {
    std::vector<double> relative_errors;  // one per parameter, flat layer order
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Central differences of `loss` w.r.t. every parameter of `model`.
inline ParamSet numeric_gradient(const ModelState& model, const std::function<double(const ModelState&)>& loss,
                                 double h = 1e-5) {
    ModelState probe = model;
    ParamSet g = zeros_like(model.params);
    const std::size_t n = model.parameter_count();
    for (std::size_t k = 0; k < n; ++k) {
        double& w = param_at(probe.params, k);
        const double orig = w;
        w = orig + h;
        const double up = loss(probe);
        w = orig - h;
        const double down = loss(probe);
        w = orig;
        param_at(g, k) = (up - down) / (2.0 * h);
    }
    return g;
}

/// Element-wise |a - n| / max(|a|, |n|, floor). The floor keeps parameters
/// with vanishing gradients from reporting roundoff as relative error.
inline GradCheckReport compare_gradients(const ParamSet& analytic, const ParamSet& numeric, double tolerance,
                                         double floor = 1e-6) {
    if (!same_structure(analytic, numeric)) throw InvalidInput("gradient structures differ");
    GradCheckReport r;
    r.tolerance = tolerance;
    std::size_t k = 0;
    for_each_pair(analytic, numeric, [&](double a, double n) {
        const double denom = std::max({std::abs(a), std::abs(n), floor});
        const double e = std::abs(a - n) / denom;
        r.relative_errors.push_back(e);
        if (e > r.max_relative_error || !std::isfinite(e)) {
            r.max_relative_error = e;
            r.worst_index = k;
        }
        ++k;
    });
    r.passed = std::isfinite(r.max_relative_error) && r.max_relative_error < tolerance;
    return r;
}

/// Mean cross-entropy of the batch under `model`.
inline double mean_cross_entropy(const ModelState& model, const Tensor& batch, std::span<const int> labels) {
    const auto probs = forward(model, batch);
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        s -= std::log(std::max(probs[i][static_cast<std::size_t>(labels[i])], 1e-12));
    return s / static_cast<double>(probs.size());
}

/// Analytic gradient of mean_cross_entropy.
inline ParamSet cross_entropy_gradient(const ModelState& model, const Tensor& batch, std::span<const int> labels) {
    const std::size_t B = batch.extent(0);
    if (labels.size() != B) throw InvalidInput("label count does not match batch");
    const std::size_t C = model.arch.num_classes();
    Tensor dz({B, C});
    const auto probs = forward(model, batch);
    for (std::size_t i = 0; i < B; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (y >= C) throw InvalidInput("label out of range");
        for (std::size_t j = 0; j < C; ++j)
            dz[i * C + j] = (probs[i][j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(B);
    }
    return backward(model, batch, dz);
}

/// Analytic vs central-difference gradient of the mean cross-entropy.
inline GradCheckReport grad_check(const ModelState& model, const Tensor& batch, std::span<const int> labels,
                                  double tolerance, double h = 1e-5) {
    const auto analytic = cross_entropy_gradient(model, batch, labels);
    const auto numeric =
        numeric_gradient(model, [&](const ModelState& m) { return mean_cross_entropy(m, batch, labels); }, h);
    return compare_gradients(analytic, numeric, tolerance);
}

/// Smallest |pre-activation| feeding any ReLU over the batch. Central
/// differences are only meaningful when this is well above the step size
/// times the input scale; otherwise a perturbation can cross the kink.
inline double relu_margin(const ModelState& model, const Tensor& batch) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < batch.extent(0); ++i) {
        const auto t = forward_trace(model, batch.row(i));
        for (std::size_t l = 0; l < model.arch.layers.size(); ++l)
            if (model.arch.layers[l].kind == LayerKind::ReLU)
                for (double v : t.acts[l]) margin = std::min(margin, std::abs(v));
    }
    return margin;
}

}  // namespace ncl

#endif  // NCL_GRAD_CHECK_HPP
