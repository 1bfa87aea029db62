#ifndef NCL_SELECTION_HPP
#define NCL_SELECTION_HPP

// Keep-rate schedule and per-batch small-loss selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ncl/error.hpp"

namespace ncl {

/// R(T) = 1 - min(T / T_k * tau, tau): linear drop from 1 to 1 - tau over T_k epochs.
struct SelectionSchedule {
    double tau = 0.0;
    std::size_t t_k = 10;

    void validate() const {
        if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("tau must lie in [0, 1), got " + std::to_string(tau));
        if (t_k == 0) throw ConfigError("T_k must be positive");
    }

    friend bool operator==(const SelectionSchedule&, const SelectionSchedule&) = default;
};

inline double r_of_t(const SelectionSchedule& s, double epoch) {
    return 1.0 - std::min(epoch / static_cast<double>(s.t_k) * s.tau, s.tau);
}

/// max(1, ceil(R * B)), guarding against R * B landing a hair above an integer.
inline std::size_t keep_count(double keep_rate, std::size_t batch) {
    const double raw = keep_rate * static_cast<double>(batch);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    return std::clamp<std::size_t>(k, 1, batch);
}

struct SelectionResult {
    std::vector<std::size_t> selected;  // batch positions, ascending loss
    double kept_fraction = 0.0;
    std::vector<double> losses;  // per-sample totals of the whole batch
    std::size_t clean_hits = 0;
};

/// Keep the ceil(R * B) smallest losses; ties go to the lower batch index.
/// `clean_mask` may be empty when ground truth is unavailable.
inline SelectionResult select_small_loss(std::span<const double> losses, double keep_rate,
                                         std::span<const std::uint8_t> clean_mask = {}) {
    if (losses.empty()) throw InvalidInput("cannot select from an empty batch");
    if (!(keep_rate > 0.0 && keep_rate <= 1.0)) throw InvalidInput("keep rate must lie in (0, 1]");
    if (!clean_mask.empty() && clean_mask.size() != losses.size()) throw InvalidInput("clean mask length differs");
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (!std::isfinite(losses[i]))
            throw TrainingDiverged("non-finite loss at batch position " + std::to_string(i), -1, -1,
                                   static_cast<long>(i));
    SelectionResult r;
    r.losses.assign(losses.begin(), losses.end());
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = keep_count(keep_rate, losses.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return losses[a] < losses[b] || (losses[a] == losses[b] && a < b); });
    r.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    r.kept_fraction = static_cast<double>(k) / static_cast<double>(losses.size());
    if (!clean_mask.empty())
        for (std::size_t i : r.selected) r.clean_hits += clean_mask[i] ? 1 : 0;
    return r;
}

/// Mean total loss over the selected samples.
inline double mean_selected_loss(const SelectionResult& r) {
    if (r.selected.empty()) throw std::logic_error("mean of an empty selection");
    double s = 0.0;
    for (std::size_t i : r.selected) s += r.losses[i];
    return s / static_cast<double>(r.selected.size());
}

/// Clean hits over selected count, summed across the given selections.
inline double label_precision(std::span<const SelectionResult> results) {
    std::size_t hits = 0, total = 0;
    for (const auto& r : results) {
        hits += r.clean_hits;
        total += r.selected.size();
    }
    if (total == 0) throw InvalidInput("label precision needs at least one selected sample");
    return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace ncl

#endif  // NCL_SELECTION_HPP
