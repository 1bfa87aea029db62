#ifndef NCL_DATA_IO_HPP
#define NCL_DATA_IO_HPP

// Dataset ingestion (IDX images, labeled CSV vectors), seeded synthetic
// Gaussian clusters, stratified splitting and train-only normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ncl/checkpoint.hpp"
#include "ncl/dataset.hpp"
#include "ncl/error.hpp"
#include "ncl/rng.hpp"

namespace ncl {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::string& path) {
    if (b.size() < off + 4)
        throw FileError(path + ": truncated header, expected at least " + std::to_string(off + 4) + " bytes, got " +
                        std::to_string(b.size()));
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace detail

/// Load an IDX image/label pair. Pixels are scaled to [0, 1]; images become
/// N x H x W x 1. `num_classes` of 0 means max label + 1 (at least 2).
inline LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                               std::size_t num_classes = 0) {
    const std::string ip = images_path.string(), lp = labels_path.string();
    const auto img = read_file_bytes(images_path);
    const auto lab = read_file_bytes(labels_path);

    const auto im = detail::read_be32(img, 0, ip);
    if (im != kIdxImageMagic) throw FileError(ip + ": bad IDX image magic at offset 0");
    const std::size_t n = detail::read_be32(img, 4, ip), h = detail::read_be32(img, 8, ip),
                      w = detail::read_be32(img, 12, ip);
    const std::size_t want_img = 16 + n * h * w;
    if (img.size() != want_img)
        throw FileError(ip + ": expected " + std::to_string(want_img) + " bytes, got " + std::to_string(img.size()));

    const auto lm = detail::read_be32(lab, 0, lp);
    if (lm != kIdxLabelMagic) throw FileError(lp + ": bad IDX label magic at offset 0");
    const std::size_t nl = detail::read_be32(lab, 4, lp);
    if (lab.size() != 8 + nl)
        throw FileError(lp + ": expected " + std::to_string(8 + nl) + " bytes, got " + std::to_string(lab.size()));
    if (nl != n)
        throw FileError(lp + ": label count " + std::to_string(nl) + " (offset 4) does not match image count " +
                        std::to_string(n) + " in " + ip);
    if (n == 0 || h == 0 || w == 0) throw FileError(ip + ": empty IDX image file");

    std::vector<double> px(n * h * w);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(img[16 + i]) / 255.0;
    std::vector<int> labels(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = lab[8 + i];
        max_label = std::max(max_label, labels[i]);
    }
    if (num_classes == 0) num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    if (static_cast<std::size_t>(max_label) >= num_classes)
        throw FileError(lp + ": label " + std::to_string(max_label) + " exceeds class count");
    return LabeledDataset::from_clean(Tensor({n, h, w, 1}, std::move(px)), std::move(labels), num_classes);
}

/// Write an IDX pair from raw bytes (images N x H x W, row-major).
inline void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                      std::size_t n, std::size_t h, std::size_t w, const std::vector<std::uint8_t>& pixels,
                      const std::vector<std::uint8_t>& labels) {
    if (pixels.size() != n * h * w || labels.size() != n) throw InvalidInput("IDX payload sizes do not match dims");
    std::vector<std::uint8_t> img, lab;
    detail::put_be32(img, kIdxImageMagic);
    detail::put_be32(img, static_cast<std::uint32_t>(n));
    detail::put_be32(img, static_cast<std::uint32_t>(h));
    detail::put_be32(img, static_cast<std::uint32_t>(w));
    img.insert(img.end(), pixels.begin(), pixels.end());
    detail::put_be32(lab, kIdxLabelMagic);
    detail::put_be32(lab, static_cast<std::uint32_t>(n));
    lab.insert(lab.end(), labels.begin(), labels.end());
    write_file_bytes(images_path, img);
    write_file_bytes(labels_path, lab);
}

/// CSV with header `f0,...,f{D-1},label`.
inline LabeledDataset load_csv_dataset(const std::filesystem::path& path, std::size_t num_classes = 0) {
    std::ifstream in(path);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 1);
    std::size_t dim = 0;
    {
        std::stringstream ss(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() < 2 || cols.back() != "label") throw ParseError(path.string() + ": header must end in 'label'", 1);
        dim = cols.size() - 1;
        for (std::size_t d = 0; d < dim; ++d)
            if (cols[d] != "f" + std::to_string(d))
                throw ParseError(path.string() + ": header column " + std::to_string(d) + " should be f" +
                                     std::to_string(d),
                                 1);
    }
    std::vector<double> feats;
    std::vector<int> labels;
    std::size_t lineno = 1;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            if (col < dim) {
                const double v = std::strtod(cell.c_str(), &end);
                if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
                    throw ParseError(path.string() + ": bad feature '" + cell + "'", lineno);
                feats.push_back(v);
            } else if (col == dim) {
                const long v = std::strtol(cell.c_str(), &end, 10);
                if (end == cell.c_str() || *end != '\0' || v < 0)
                    throw ParseError(path.string() + ": bad label '" + cell + "'", lineno);
                labels.push_back(static_cast<int>(v));
                max_label = std::max(max_label, static_cast<int>(v));
            }
            ++col;
        }
        if (col != dim + 1) throw ParseError(path.string() + ": expected " + std::to_string(dim + 1) + " columns", lineno);
    }
    if (labels.empty()) throw ParseError(path.string() + ": no data rows", lineno);
    if (num_classes == 0) num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    if (static_cast<std::size_t>(max_label) >= num_classes)
        throw ParseError(path.string() + ": label exceeds class count", lineno);
    const std::size_t n = labels.size();
    return LabeledDataset::from_clean(Tensor({n, dim}, std::move(feats)), std::move(labels), num_classes);
}

inline void write_csv_dataset(const LabeledDataset& d, const std::filesystem::path& path) {
    if (d.sample_shape().size() != 1) throw InvalidInput("CSV export needs rank-1 samples");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileError(path.string() + ": cannot open for writing");
    const std::size_t dim = d.sample_shape()[0];
    for (std::size_t j = 0; j < dim; ++j) out << 'f' << j << ',';
    out << "label\n";
    out.precision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (double v : d.sample(i)) out << v << ',';
        out << d.clean_labels[i] << '\n';
    }
    if (!out) throw FileError(path.string() + ": write failed");
}

struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t per_class = 500;
    std::size_t dim = 16;
    double separation = 4.0;  // distance of each class mean from the origin, in noise std units
    double noise_std = 1.0;
    std::uint64_t seed = 0;
};

/// Unit class directions, each a palindrome so that reversing a sample's
/// coordinates keeps it in its class. The first `dim` classes use +/- the
/// palindromic axes (e_k + e_{D-1-k}) / sqrt(2); further classes get random
/// palindromic directions.
inline std::vector<std::vector<double>> synthetic_directions(const SyntheticSpec& s) {
    const std::size_t half = s.dim / 2;
    std::vector<std::vector<double>> dirs;
    Rng rng(s.seed ^ 0x5EED5EEDULL, Stream::Data);
    for (std::size_t c = 0; c < s.classes; ++c) {
        std::vector<double> v(s.dim, 0.0);
        if (c < 2 * half) {
            const std::size_t k = c % half;
            const double sign = (c / half) % 2 == 0 ? 1.0 : -1.0;
            v[k] = v[s.dim - 1 - k] = sign / std::sqrt(2.0);
        } else {
            double norm = 0.0;
            for (std::size_t k = 0; k < half; ++k) {
                v[k] = v[s.dim - 1 - k] = rng.normal();
                norm += 2.0 * v[k] * v[k];
            }
            for (double& x : v) x /= std::sqrt(norm);
        }
        dirs.push_back(std::move(v));
    }
    return dirs;
}

/// Isotropic Gaussian clusters around separation * direction(c). Samples
/// are class-major.
inline LabeledDataset make_synthetic(const SyntheticSpec& s) {
    if (s.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (s.dim == 0 || s.dim % 2 != 0) throw ConfigError("synthetic feature dimension must be even and positive");
    if (!(s.separation > 0.0) || !(s.noise_std > 0.0)) throw ConfigError("separation and noise std must be positive");
    if (s.per_class == 0) throw ConfigError("synthetic data needs samples per class");
    const auto dirs = synthetic_directions(s);
    Rng rng(s.seed, Stream::Data);
    const std::size_t n = s.classes * s.per_class;
    std::vector<double> feats;
    feats.reserve(n * s.dim);
    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t c = 0; c < s.classes; ++c)
        for (std::size_t i = 0; i < s.per_class; ++i) {
            for (std::size_t k = 0; k < s.dim; ++k) feats.push_back(s.separation * dirs[c][k] + s.noise_std * rng.normal());
            labels.push_back(static_cast<int>(c));
        }
    return LabeledDataset::from_clean(Tensor({n, s.dim}, std::move(feats)), std::move(labels), s.classes);
}

struct Split {
    LabeledDataset train;
    LabeledDataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Stratified by clean label: each class contributes round(frac * n_c)
/// samples (at least one, at most n_c - 1) to the training side.
inline Split split(const LabeledDataset& d, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    Rng rng(seed, Stream::Split);
    Split s;
    for (std::size_t c = 0; c < d.num_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (static_cast<std::size_t>(d.clean_labels[i]) == c) members.push_back(i);
        if (members.empty()) continue;
        if (members.size() < 2)
            throw ConfigError("class " + std::to_string(c) + " has fewer than 2 samples and cannot be split");
        rng.shuffle(members);
        auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        k = std::clamp<std::size_t>(k, 1, members.size() - 1);
        s.train_indices.insert(s.train_indices.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
        s.test_indices.insert(s.test_indices.end(), members.begin() + static_cast<std::ptrdiff_t>(k), members.end());
    }
    std::sort(s.train_indices.begin(), s.train_indices.end());
    std::sort(s.test_indices.begin(), s.test_indices.end());
    s.train = d.subset(s.train_indices);
    s.test = d.subset(s.test_indices);
    return s;
}

/// Per-feature affine standardization fitted on one dataset.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::size_t fitted_rows = 0;

    static FeatureStats fit(const LabeledDataset& train) {
        FeatureStats s;
        const std::size_t n = train.size(), dim = train.features.row_size();
        s.mean.assign(dim, 0.0);
        s.stddev.assign(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = train.sample(i);
            for (std::size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
        }
        for (double& m : s.mean) m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = train.sample(i);
            for (std::size_t j = 0; j < dim; ++j) s.stddev[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
        }
        for (double& v : s.stddev) {
            v = std::sqrt(v / static_cast<double>(n));
            if (v < 1e-12) v = 1.0;
        }
        s.fitted_rows = n;
        return s;
    }

    void apply(LabeledDataset& d) const {
        if (d.features.row_size() != mean.size()) throw InvalidInput("feature statistics do not match dataset width");
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto r = d.features.row(i);
            for (std::size_t j = 0; j < mean.size(); ++j) r[j] = (r[j] - mean[j]) / stddev[j];
        }
    }
};

}  // namespace ncl

#endif  // NCL_DATA_IO_HPP
