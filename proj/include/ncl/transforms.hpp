#ifndef NCL_TRANSFORMS_HPP
#define NCL_TRANSFORMS_HPP

// Label-preserving spatial transforms producing the second view of a sample.
// Images are H x W x Ch tensors; rotations are counter-clockwise.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/tensor.hpp"

namespace ncl {

enum class TransformTag { HFlip, VFlip, Rot90, Rot180, Rot270, Rot360, ScaleCrop, VectorMirror };

enum class Resampling { Bilinear, Nearest };

struct TransformKind {
    TransformTag tag = TransformTag::HFlip;
    std::size_t intermediate_size = 48;  // ScaleCrop only
    std::size_t crop_size = 32;          // ScaleCrop only
    Resampling resampling = Resampling::Bilinear;

    friend bool operator==(const TransformKind&, const TransformKind&) = default;
};

inline constexpr std::string_view transform_name(TransformTag tag) {
    switch (tag) {
        case TransformTag::HFlip: return "hflip";
        case TransformTag::VFlip: return "vflip";
        case TransformTag::Rot90: return "rot90";
        case TransformTag::Rot180: return "rot180";
        case TransformTag::Rot270: return "rot270";
        case TransformTag::Rot360: return "rot360";
        case TransformTag::ScaleCrop: return "scale_crop";
        case TransformTag::VectorMirror: return "vector_mirror";
    }
    return "?";
}

inline TransformTag parse_transform(std::string_view name) {
    for (auto t : {TransformTag::HFlip, TransformTag::VFlip, TransformTag::Rot90, TransformTag::Rot180,
                   TransformTag::Rot270, TransformTag::Rot360, TransformTag::ScaleCrop, TransformTag::VectorMirror})
        if (transform_name(t) == name) return t;
    throw ConfigError("unknown transform '" + std::string(name) + "'");
}

/// Reverse coordinate order.
inline std::vector<double> apply_vector_mirror(std::span<const double> v) { return {v.rbegin(), v.rend()}; }

namespace detail {

inline void bilinear_resize(std::span<const double> in, std::size_t H, std::size_t W, std::size_t C,
                            std::size_t OH, std::size_t OW, std::vector<double>& out) {
    out.assign(OH * OW * C, 0.0);
    auto src_coord = [](std::size_t dst, std::size_t in_n, std::size_t out_n) {
        const double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(in_n - 1));
    };
    for (std::size_t y = 0; y < OH; ++y) {
        const double sy = src_coord(y, H, OH);
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < OW; ++x) {
            const double sx = src_coord(x, W, OW);
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, W - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < C; ++c) {
                const double a = in[(y0 * W + x0) * C + c], b = in[(y0 * W + x1) * C + c];
                const double d = in[(y1 * W + x0) * C + c], e = in[(y1 * W + x1) * C + c];
                // Exact weights of zero skip the multiply so identity resizes stay bit-exact.
                double top = fx == 0.0 ? a : a * (1.0 - fx) + b * fx;
                double bot = fx == 0.0 ? d : d * (1.0 - fx) + e * fx;
                out[(y * OW + x) * C + c] = fy == 0.0 ? top : top * (1.0 - fy) + bot * fy;
            }
        }
    }
}

inline void nearest_resize(std::span<const double> in, std::size_t H, std::size_t W, std::size_t C,
                           std::size_t OH, std::size_t OW, std::vector<double>& out) {
    out.assign(OH * OW * C, 0.0);
    for (std::size_t y = 0; y < OH; ++y) {
        const std::size_t sy = std::min(y * H / OH, H - 1);
        for (std::size_t x = 0; x < OW; ++x) {
            const std::size_t sx = std::min(x * W / OW, W - 1);
            for (std::size_t c = 0; c < C; ++c) out[(y * OW + x) * C + c] = in[(sy * W + sx) * C + c];
        }
    }
}

}  // namespace detail

/// Shape of the transformed sample.
inline Shape transformed_shape(const TransformKind& kind, const Shape& shape) {
    if (kind.tag == TransformTag::VectorMirror) {
        if (shape.size() != 1) throw InvalidInput("vector_mirror needs a rank-1 sample, got " + shape_string(shape));
        return shape;
    }
    if (shape.size() != 3) throw InvalidInput(std::string(transform_name(kind.tag)) + " needs an HxWxCh image, got " + shape_string(shape));
    switch (kind.tag) {
        case TransformTag::Rot90:
        case TransformTag::Rot180:
        case TransformTag::Rot270:
        case TransformTag::Rot360:
            if (shape[0] != shape[1])
                throw InvalidInput("rotation needs a square image, got " + shape_string(shape));
            return shape;
        case TransformTag::ScaleCrop:
            if (kind.crop_size == 0 || kind.crop_size > kind.intermediate_size)
                throw InvalidInput("scale_crop needs 0 < crop size <= intermediate size");
            return {kind.crop_size, kind.crop_size, shape[2]};
        default:
            return shape;
    }
}

/// Transform one sample laid out as `shape`, writing into `out`.
inline void apply_into(const TransformKind& kind, std::span<const double> in, const Shape& shape,
                       std::vector<double>& out) {
    transformed_shape(kind, shape);
    if (in.size() != shape_size(shape)) throw InvalidInput("sample length does not match its shape");
    if (kind.tag == TransformTag::VectorMirror) {
        out.assign(in.rbegin(), in.rend());
        return;
    }
    const std::size_t H = shape[0], W = shape[1], C = shape[2];
    if (kind.tag == TransformTag::ScaleCrop) {
        std::vector<double> scaled;
        const std::size_t S = kind.intermediate_size, K = kind.crop_size;
        if (kind.resampling == Resampling::Bilinear)
            detail::bilinear_resize(in, H, W, C, S, S, scaled);
        else
            detail::nearest_resize(in, H, W, C, S, S, scaled);
        const std::size_t off = (S - K) / 2;
        out.resize(K * K * C);
        for (std::size_t y = 0; y < K; ++y)
            for (std::size_t x = 0; x < K; ++x)
                for (std::size_t c = 0; c < C; ++c)
                    out[(y * K + x) * C + c] = scaled[((y + off) * S + x + off) * C + c];
        return;
    }
    out.resize(in.size());
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            std::size_t si = i, sj = j;
            switch (kind.tag) {
                case TransformTag::HFlip: sj = W - 1 - j; break;
                case TransformTag::VFlip: si = H - 1 - i; break;
                case TransformTag::Rot90: si = j; sj = W - 1 - i; break;
                case TransformTag::Rot180: si = H - 1 - i; sj = W - 1 - j; break;
                case TransformTag::Rot270: si = H - 1 - j; sj = i; break;
                default: break;
            }
            for (std::size_t c = 0; c < C; ++c) out[(i * W + j) * C + c] = in[(si * W + sj) * C + c];
        }
}

/// Transform an image (H x W x Ch) or, for VectorMirror, a rank-1 vector.
inline Tensor apply(const TransformKind& kind, const Tensor& sample) {
    const Shape out_shape = transformed_shape(kind, sample.shape());
    std::vector<double> out;
    apply_into(kind, sample.data(), sample.shape(), out);
    return Tensor(out_shape, std::move(out));
}

}  // namespace ncl

#endif  // NCL_TRANSFORMS_HPP
