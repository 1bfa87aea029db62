#ifndef NCL_DATASET_HPP
#define NCL_DATASET_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/tensor.hpp"

namespace ncl {

/// Samples with their (possibly noisy) training labels. The clean labels and
/// clean mask are ground truth kept for evaluation only; training code reads
/// `noisy_labels`.
struct LabeledDataset {
    Tensor features;  // N x sample shape
    std::vector<int> noisy_labels;
    std::vector<int> clean_labels;
    std::vector<std::uint8_t> clean_mask;
    std::size_t num_classes = 0;

    std::size_t size() const noexcept { return noisy_labels.size(); }
    Shape sample_shape() const { return features.row_shape(); }
    std::span<const double> sample(std::size_t i) const { return features.row(i); }

    /// Dataset whose noisy labels equal the clean ones.
    static LabeledDataset from_clean(Tensor features, std::vector<int> labels, std::size_t num_classes) {
        LabeledDataset d;
        d.features = std::move(features);
        d.clean_labels = labels;
        d.noisy_labels = std::move(labels);
        d.clean_mask.assign(d.noisy_labels.size(), 1);
        d.num_classes = num_classes;
        d.validate();
        return d;
    }

    void refresh_mask() {
        clean_mask.resize(size());
        for (std::size_t i = 0; i < size(); ++i) clean_mask[i] = noisy_labels[i] == clean_labels[i] ? 1 : 0;
    }

    void validate() const {
        const std::size_t n = noisy_labels.size();
        if (clean_labels.size() != n || clean_mask.size() != n)
            throw InvalidInput("label arrays have inconsistent lengths");
        if (n == 0) throw InvalidInput("dataset is empty");
        if (features.rank() < 2 || features.extent(0) != n)
            throw InvalidInput("feature rows " + shape_string(features.shape()) + " do not match " +
                               std::to_string(n) + " labels");
        if (num_classes < 2) throw InvalidInput("dataset needs at least two classes");
        for (std::size_t i = 0; i < n; ++i) {
            if (noisy_labels[i] < 0 || static_cast<std::size_t>(noisy_labels[i]) >= num_classes ||
                clean_labels[i] < 0 || static_cast<std::size_t>(clean_labels[i]) >= num_classes)
                throw InvalidInput("label out of range at sample " + std::to_string(i));
            if ((clean_mask[i] != 0) != (noisy_labels[i] == clean_labels[i]))
                throw InvalidInput("clean mask disagrees with labels at sample " + std::to_string(i));
        }
    }

    LabeledDataset subset(std::span<const std::size_t> indices) const {
        LabeledDataset d;
        Shape shape = features.shape();
        shape[0] = indices.size();
        std::vector<double> data;
        data.reserve(indices.size() * features.row_size());
        for (std::size_t i : indices) {
            auto r = sample(i);
            data.insert(data.end(), r.begin(), r.end());
            d.noisy_labels.push_back(noisy_labels[i]);
            d.clean_labels.push_back(clean_labels[i]);
            d.clean_mask.push_back(clean_mask[i]);
        }
        d.features = Tensor(std::move(shape), std::move(data));
        d.num_classes = num_classes;
        return d;
    }
};

}  // namespace ncl

#endif  // NCL_DATASET_HPP
