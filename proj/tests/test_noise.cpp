#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "ncl/noise.hpp"

using namespace ncl;

namespace {

LabeledDataset balanced(std::size_t classes, std::size_t per_class) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, static_cast<int>(c));
    Tensor x({labels.size(), 2});
    for (std::size_t i = 0; i < labels.size(); ++i) x[2 * i] = static_cast<double>(i);
    return LabeledDataset::from_clean(std::move(x), std::move(labels), classes);
}

std::size_t corrupted(const LabeledDataset& d) {
    std::size_t n = 0;
    for (auto m : d.clean_mask) n += m ? 0 : 1;
    return n;
}

}  // namespace

TEST(Symmetric, ZeroRateIsIdentity) {
    const auto clean = balanced(4, 10);
    const auto d = inject_symmetric(clean, 0.0, 1);
    EXPECT_EQ(d.noisy_labels, clean.clean_labels);
    for (auto m : d.clean_mask) EXPECT_EQ(m, 1);
}

TEST(Symmetric, FullRateWithTwoClassesFlipsEverything) {
    const auto d = inject_symmetric(balanced(2, 25), 1.0, 3);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.noisy_labels[i], 1 - d.clean_labels[i]);
}

TEST(Symmetric, ExactCountAndUniformTargets) {
    const auto d = inject_symmetric(balanced(10, 1000), 0.5, 42);
    EXPECT_EQ(corrupted(d), 5000u);
    // Pearson chi-square over the 90 (clean, noisy) off-diagonal cells.
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> per_class;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!d.clean_mask[i]) {
            cells[{d.clean_labels[i], d.noisy_labels[i]}] += 1;
            per_class[d.clean_labels[i]] += 1;
        }
    double chi2 = 0.0;
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b) {
            if (a == b) continue;
            EXPECT_EQ(cells.count({a, a}), 0u);
            const double expected = per_class[a] / 9.0;
            const double diff = cells[{a, b}] - expected;
            chi2 += diff * diff / expected;
        }
    // 80 degrees of freedom (9 classes free per row minus 1, times 10); 99th percentile.
    EXPECT_LT(chi2, 112.33);
}

TEST(Symmetric, MeasuredRateIsRoundedExactly) {
    for (double r : {0.1, 0.25, 0.333, 0.8}) {
        const auto d = inject_symmetric(balanced(3, 17), r, 9);
        EXPECT_EQ(corrupted(d), corrupted_count(r, 51)) << r;
    }
    EXPECT_EQ(corrupted_count(0.5, 5), 3u);  // round half away from zero
}

TEST(Symmetric, DeterministicAndNeverTouchesFeatures) {
    const auto clean = balanced(5, 40);
    const auto a = inject_symmetric(clean, 0.4, 7), b = inject_symmetric(clean, 0.4, 7);
    const auto c = inject_symmetric(clean, 0.4, 8);
    EXPECT_EQ(a.noisy_labels, b.noisy_labels);
    EXPECT_NE(a.noisy_labels, c.noisy_labels);
    EXPECT_EQ(a.features, clean.features);
    EXPECT_EQ(a.clean_labels, clean.clean_labels);
    EXPECT_NO_THROW(a.validate());
}

TEST(Symmetric, RejectsBadRate) {
    EXPECT_THROW(inject_symmetric(balanced(2, 4), 1.5, 0), ConfigError);
    EXPECT_THROW(inject_symmetric(balanced(2, 4), -0.1, 0), ConfigError);
}

TEST(Asymmetric, ZeroRateIsIdentity) {
    const auto clean = balanced(4, 10);
    EXPECT_EQ(inject_asymmetric(clean, 0.0, default_swap_pairs(4), 1).noisy_labels, clean.clean_labels);
}

TEST(Asymmetric, FullSwapOnTwoClasses) {
    const auto d = inject_asymmetric(balanced(2, 10), 1.0, {{0, 1}, {1, 0}}, 2);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.noisy_labels[i], 1 - d.clean_labels[i]);
}

TEST(Asymmetric, FiveSwapsCorruptFortyPercent) {
    const auto pairs = default_swap_pairs(10);
    ASSERT_EQ(pairs.size(), 10u);
    const auto d = inject_asymmetric(balanced(10, 500), 0.4, pairs, 5);
    EXPECT_EQ(corrupted(d), 2000u);
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!d.clean_mask[i]) {
            EXPECT_EQ(d.noisy_labels[i], d.clean_labels[i] ^ 1);
        }
    EXPECT_DOUBLE_EQ(effective_tau({NoiseKind::Asymmetric, 0.4, pairs, 5}), 0.2);
}

TEST(Asymmetric, OnlySourceClassesChange) {
    const auto d = inject_asymmetric(balanced(4, 20), 0.5, {{0, 3}}, 6);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.clean_labels[i] != 0) {
            EXPECT_TRUE(d.clean_mask[i]);
        } else if (!d.clean_mask[i]) {
            EXPECT_EQ(d.noisy_labels[i], 3);
            ++moved;
        }
    }
    EXPECT_EQ(moved, 10u);
}

TEST(Asymmetric, RejectsBadPairMaps) {
    const auto d = balanced(4, 5);
    EXPECT_THROW(inject_asymmetric(d, 0.3, {{0, 1}, {0, 2}}, 0), ConfigError);
    EXPECT_THROW(inject_asymmetric(d, 0.3, {{1, 1}}, 0), ConfigError);
    EXPECT_THROW(inject_asymmetric(d, 0.3, {{0, 4}}, 0), ConfigError);
    EXPECT_THROW(inject_asymmetric(d, 0.3, {}, 0), ConfigError);
    EXPECT_THROW(inject(d, {NoiseKind::Symmetric, 0.3, {{0, 1}}, 0}), ConfigError);
}

TEST(EffectiveTau, Examples) {
    EXPECT_EQ(effective_tau({NoiseKind::Symmetric, 0.8, {}, 0}), 0.8);
    EXPECT_EQ(effective_tau({NoiseKind::Asymmetric, 0.4, {{0, 1}}, 0}), 0.2);
    EXPECT_EQ(effective_tau({NoiseKind::Symmetric, 0.0, {}, 0}), 0.0);
}

TEST(Manifest, RoundTripAndParseErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "ncl_manifest_test";
    std::filesystem::create_directories(dir);
    const auto d = inject_symmetric(balanced(3, 6), 0.5, 11);
    write_manifest(d, dir / "m.csv");
    const auto rows = read_manifest(dir / "m.csv");
    ASSERT_EQ(rows.size(), d.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].index, i);
        EXPECT_EQ(rows[i].clean_label, d.clean_labels[i]);
        EXPECT_EQ(rows[i].noisy_label, d.noisy_labels[i]);
        EXPECT_EQ(rows[i].is_clean, d.clean_mask[i] != 0);
    }
    {
        std::ofstream bad(dir / "bad.csv");
        bad << kManifestHeader << "\n0,1,1,1\nnot,a,row\n";
    }
    try {
        read_manifest(dir / "bad.csv");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(read_manifest(dir / "missing.csv"), FileError);
    std::filesystem::remove_all(dir);
}
