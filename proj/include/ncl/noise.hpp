#ifndef NCL_NOISE_HPP
#define NCL_NOISE_HPP

// Synthetic label corruption. Exactly round(r * n) samples are corrupted,
// chosen by a seeded shuffle (see rng.hpp for the generator).

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ncl/dataset.hpp"
#include "ncl/error.hpp"
#include "ncl/rng.hpp"

namespace ncl {

enum class NoiseKind { Symmetric, Asymmetric };

using PairMap = std::vector<std::pair<int, int>>;

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Symmetric;
    double rate = 0.0;
    PairMap pair_map;
    std::uint64_t seed = 0;

    void validate(std::size_t num_classes) const {
        if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1], got " + std::to_string(rate));
        if (kind == NoiseKind::Symmetric && !pair_map.empty())
            throw ConfigError("symmetric noise takes no pair map");
        if (kind == NoiseKind::Asymmetric) {
            if (pair_map.empty()) throw ConfigError("asymmetric noise needs a nonempty pair map");
            std::set<int> sources;
            for (auto [a, b] : pair_map) {
                if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= num_classes ||
                    static_cast<std::size_t>(b) >= num_classes)
                    throw ConfigError("pair " + std::to_string(a) + "->" + std::to_string(b) + " is out of range");
                if (a == b) throw ConfigError("pair maps class " + std::to_string(a) + " to itself");
                if (!sources.insert(a).second)
                    throw ConfigError("class " + std::to_string(a) + " appears twice as a pair source");
            }
        }
    }
};

/// Disjoint swaps 0<->1, 2<->3, ... covering the first 2*floor(C/2) classes.
inline PairMap default_swap_pairs(std::size_t num_classes) {
    PairMap m;
    for (int a = 0; a + 1 < static_cast<int>(num_classes); a += 2) {
        m.emplace_back(a, a + 1);
        m.emplace_back(a + 1, a);
    }
    return m;
}

/// Whole-dataset noise rate used by the keep-rate schedule.
inline double effective_tau(const NoiseSpec& spec) {
    return spec.kind == NoiseKind::Symmetric ? spec.rate : spec.rate / 2.0;
}

inline std::size_t corrupted_count(double rate, std::size_t n) {
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

/// Replace the label of round(r * N) samples by one drawn uniformly from the
/// C - 1 other classes.
inline LabeledDataset inject_symmetric(const LabeledDataset& clean, double rate, std::uint64_t seed) {
    NoiseSpec{NoiseKind::Symmetric, rate, {}, seed}.validate(clean.num_classes);
    LabeledDataset d = clean;
    d.noisy_labels = d.clean_labels;
    Rng rng(seed, Stream::Noise);
    const auto order = rng.permutation(d.size());
    const std::size_t k = corrupted_count(rate, d.size());
    const auto others = static_cast<std::uint64_t>(d.num_classes - 1);
    for (std::size_t n = 0; n < k; ++n) {
        const std::size_t i = order[n];
        const int u = static_cast<int>(rng.uniform_index(others));
        d.noisy_labels[i] = u < d.clean_labels[i] ? u : u + 1;
    }
    d.refresh_mask();
    return d;
}

/// For each source class a -> b, relabel round(r * n_a) of class a's samples to b.
inline LabeledDataset inject_asymmetric(const LabeledDataset& clean, double rate, const PairMap& pairs,
                                        std::uint64_t seed) {
    NoiseSpec{NoiseKind::Asymmetric, rate, pairs, seed}.validate(clean.num_classes);
    LabeledDataset d = clean;
    d.noisy_labels = d.clean_labels;
    Rng rng(seed, Stream::Noise);
    for (auto [a, b] : pairs) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d.clean_labels[i] == a) members.push_back(i);
        rng.shuffle(members);
        const std::size_t k = corrupted_count(rate, members.size());
        for (std::size_t n = 0; n < k; ++n) d.noisy_labels[members[n]] = b;
    }
    d.refresh_mask();
    return d;
}

inline LabeledDataset inject(const LabeledDataset& clean, const NoiseSpec& spec) {
    spec.validate(clean.num_classes);
    return spec.kind == NoiseKind::Symmetric ? inject_symmetric(clean, spec.rate, spec.seed)
                                             : inject_asymmetric(clean, spec.rate, spec.pair_map, spec.seed);
}

inline constexpr const char* kManifestHeader = "index,clean_label,noisy_label,is_clean";

inline void write_manifest(const LabeledDataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileError(path.string() + ": cannot open for writing");
    out << kManifestHeader << '\n';
    for (std::size_t i = 0; i < d.size(); ++i)
        out << i << ',' << d.clean_labels[i] << ',' << d.noisy_labels[i] << ',' << (d.clean_mask[i] ? 1 : 0) << '\n';
    if (!out) throw FileError(path.string() + ": write failed");
}

struct ManifestRow {
    std::size_t index;
    int clean_label;
    int noisy_label;
    bool is_clean;
};

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader)
        throw ParseError(path.string() + ": bad manifest header", 1);
    std::vector<ManifestRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ManifestRow r{};
        int clean = 0;
        if (std::sscanf(line.c_str(), "%zu,%d,%d,%d", &r.index, &r.clean_label, &r.noisy_label, &clean) != 4)
            throw ParseError(path.string() + ": malformed manifest row", lineno);
        r.is_clean = clean != 0;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace ncl

#endif  // NCL_NOISE_HPP
