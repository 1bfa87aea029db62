#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncl/rng.hpp"
#include "ncl/selection.hpp"

using namespace ncl;

namespace {

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// Full stable sort by loss: equal losses keep their batch order.
std::vector<std::size_t> brute_force(const std::vector<double>& losses, std::size_t k) {
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    order.resize(k);
    return order;
}

}  // namespace

TEST(Schedule, Examples) {
    EXPECT_EQ(r_of_t({0.5, 10}, 0), 1.0);
    EXPECT_DOUBLE_EQ(r_of_t({0.5, 10}, 5), 0.75);
    EXPECT_EQ(r_of_t({0.5, 10}, 25), 0.5);
    EXPECT_EQ(r_of_t({0.0, 10}, 7), 1.0);
}

TEST(Schedule, BoundedMonotoneAndFlatAfterTk) {
    for (double tau : {0.0, 0.2, 0.25, 0.4, 0.5, 0.8}) {
        for (std::size_t tk : {1u, 3u, 10u}) {
            const SelectionSchedule s{tau, tk};
            double prev = 1.0;
            for (int t = 0; t <= 40; ++t) {
                const double r = r_of_t(s, t);
                EXPECT_LE(r, prev);
                EXPECT_GE(r, 1.0 - tau);
                EXPECT_LE(r, 1.0);
                if (static_cast<std::size_t>(t) >= tk) {
                    EXPECT_EQ(r, 1.0 - tau);
                }
                prev = r;
            }
        }
    }
}

TEST(Schedule, Validation) {
    EXPECT_THROW((SelectionSchedule{1.0, 10}.validate()), ConfigError);
    EXPECT_THROW((SelectionSchedule{-0.1, 10}.validate()), ConfigError);
    EXPECT_THROW((SelectionSchedule{0.5, 0}.validate()), ConfigError);
    EXPECT_NO_THROW((SelectionSchedule{0.5, 10}.validate()));
}

TEST(KeepCount, CeilingWithFloor) {
    EXPECT_EQ(keep_count(0.5, 4), 2u);
    EXPECT_EQ(keep_count(0.5, 5), 3u);
    EXPECT_EQ(keep_count(1.0, 7), 7u);
    EXPECT_EQ(keep_count(0.01, 7), 1u);
    // 0.7 * 10 is 7.000000000000001 in binary; still seven samples
    EXPECT_EQ(keep_count(0.7, 10), 7u);
    EXPECT_EQ(keep_count(1.0 - 0.3, 10), 7u);
}

TEST(SelectSmallLoss, Examples) {
    const std::vector<double> l{0.1, 2.0, 0.5, 3.0};
    EXPECT_EQ(select_small_loss(l, 0.5).selected, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(sorted(select_small_loss(l, 1.0).selected), (std::vector<std::size_t>{0, 1, 2, 3}));
    const std::vector<double> same(4, 1.0);
    EXPECT_EQ(select_small_loss(same, 0.5).selected, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectSmallLoss, CleanHitsAndFraction) {
    const std::vector<double> l{0.1, 2.0, 0.5, 3.0, 0.2};
    const std::vector<std::uint8_t> mask{1, 1, 0, 0, 1};
    const auto r = select_small_loss(l, 0.6, mask);
    EXPECT_EQ(r.selected, (std::vector<std::size_t>{0, 4, 2}));
    EXPECT_EQ(r.clean_hits, 2u);
    EXPECT_DOUBLE_EQ(r.kept_fraction, 0.6);
    EXPECT_EQ(r.losses, l);
}

TEST(SelectSmallLoss, MatchesBruteForceOnRandomBatches) {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t b = 1 + rng.uniform_index(64);
        std::vector<double> l(b);
        // Coarse values force plenty of ties.
        for (double& v : l) v = static_cast<double>(rng.uniform_index(8)) * 0.25;
        const double keep = 0.05 + 0.95 * rng.uniform01();
        const auto r = select_small_loss(l, keep);
        ASSERT_EQ(r.selected, brute_force(l, keep_count(keep, b))) << "trial " << trial;
        double worst_kept = 0.0;
        for (auto i : r.selected) worst_kept = std::max(worst_kept, l[i]);
        for (std::size_t i = 0; i < b; ++i)
            if (std::find(r.selected.begin(), r.selected.end(), i) == r.selected.end()) {
                EXPECT_LE(worst_kept, l[i]);
            }
    }
}

TEST(SelectSmallLoss, Errors) {
    EXPECT_THROW(select_small_loss(std::vector<double>{}, 0.5), InvalidInput);
    EXPECT_THROW(select_small_loss(std::vector<double>{1.0}, 0.0), InvalidInput);
    EXPECT_THROW(select_small_loss(std::vector<double>{1.0}, 1.5), InvalidInput);
    const std::vector<double> l{0.1, std::nan(""), 0.3};
    try {
        select_small_loss(l, 0.5);
        FAIL() << "expected divergence";
    } catch (const TrainingDiverged& e) {
        EXPECT_EQ(e.sample(), 1);
    }
}

TEST(MeanSelectedLoss, Examples) {
    EXPECT_DOUBLE_EQ(mean_selected_loss(select_small_loss(std::vector<double>{0.7, 3.0}, 0.5)), 0.7);
    EXPECT_DOUBLE_EQ(mean_selected_loss(select_small_loss(std::vector<double>{0.1, 0.5, 9.0}, 0.6)), 0.3);
    EXPECT_DOUBLE_EQ(mean_selected_loss(select_small_loss(std::vector<double>{1.0, 2.0, 3.0}, 1.0)), 2.0);
    EXPECT_THROW(mean_selected_loss(SelectionResult{}), std::logic_error);
}

TEST(LabelPrecision, Examples) {
    const std::vector<double> l{0.1, 0.2, 0.3, 0.4};
    const std::vector<std::uint8_t> all_clean(4, 1);
    const std::vector<SelectionResult> clean{select_small_loss(l, 0.5, all_clean), select_small_loss(l, 1.0, all_clean)};
    EXPECT_EQ(label_precision(clean), 1.0);
    EXPECT_THROW(label_precision(std::span<const SelectionResult>{}), InvalidInput);
}

TEST(LabelPrecision, RandomSelectionMatchesNoisePrior) {
    // Random losses carry no information, so precision should sit near 1 - tau.
    Rng rng(23);
    std::vector<SelectionResult> results;
    for (int batch = 0; batch < 400; ++batch) {
        std::vector<double> l(32);
        std::vector<std::uint8_t> mask(32);
        for (std::size_t i = 0; i < 32; ++i) {
            l[i] = rng.uniform01();
            mask[i] = rng.uniform01() < 0.5 ? 1 : 0;
        }
        results.push_back(select_small_loss(l, 0.5, mask));
    }
    // 6400 draws, standard error about 0.00625
    EXPECT_NEAR(label_precision(results), 0.5, 0.025);
}
