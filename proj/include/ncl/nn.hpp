#ifndef NCL_NN_HPP
#define NCL_NN_HPP

// Minimal feed-forward network engine with hand-derived gradients.
//
// A network is a chain of layers described by an Architecture. Supported
// kinds: dense (implicitly flattens its input), 2-D convolution with stride 1
// and zero "same" padding, ReLU, and global average pooling. The final layer
// produces logits; softmax is applied by forward().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/rng.hpp"
#include "ncl/tensor.hpp"

namespace ncl {

enum class LayerKind : std::uint8_t { Dense, Conv2D, ReLU, GlobalAvgPool };

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t units = 0;   // dense outputs or conv filters
    std::size_t kernel = 0;  // conv kernel side (odd)

    static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, units, 0}; }
    static LayerSpec conv(std::size_t filters, std::size_t kernel) { return {LayerKind::Conv2D, filters, kernel}; }
    static LayerSpec relu() { return {LayerKind::ReLU, 0, 0}; }
    static LayerSpec gap() { return {LayerKind::GlobalAvgPool, 0, 0}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::size_t parse_extent(std::string_view s, std::string_view context) {
    if (s.empty()) throw ConfigError("empty number in architecture '" + std::string(context) + "'");
    std::size_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9')
            throw ConfigError("bad number '" + std::string(s) + "' in architecture '" + std::string(context) + "'");
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    if (v == 0) throw ConfigError("zero extent in architecture '" + std::string(context) + "'");
    return v;
}

}  // namespace detail

/// Input shape plus the ordered layer list.
///
/// Text form: `<input extents joined by x>|<layer>,<layer>,...` where a layer
/// is `dense:N`, `conv:F:K`, `relu` or `gap`. Example:
/// `8x8x1|conv:8:3,relu,conv:16:3,relu,gap,dense:10`.
struct Architecture {
    Shape input_shape;
    std::vector<LayerSpec> layers;

    friend bool operator==(const Architecture&, const Architecture&) = default;

    /// Output shape of every layer; throws InvalidInput if the chain is inconsistent.
    std::vector<Shape> layer_shapes() const {
        if (input_shape.empty()) throw InvalidInput("architecture has no input shape");
        if (layers.empty()) throw InvalidInput("architecture has no layers");
        std::vector<Shape> shapes;
        Shape cur = input_shape;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& spec = layers[l];
            switch (spec.kind) {
                case LayerKind::Dense:
                    if (spec.units == 0) throw InvalidInput("dense layer " + std::to_string(l) + " has no units");
                    cur = {spec.units};
                    break;
                case LayerKind::Conv2D:
                    if (cur.size() != 3)
                        throw InvalidInput("conv layer " + std::to_string(l) + " needs HxWxCh input, got " +
                                           shape_string(cur));
                    if (spec.kernel % 2 == 0 || spec.units == 0)
                        throw InvalidInput("conv layer " + std::to_string(l) + " needs an odd kernel and filters > 0");
                    cur = {cur[0], cur[1], spec.units};
                    break;
                case LayerKind::ReLU:
                    break;
                case LayerKind::GlobalAvgPool:
                    if (cur.size() != 3)
                        throw InvalidInput("pool layer " + std::to_string(l) + " needs HxWxCh input");
                    cur = {cur[2]};
                    break;
            }
            shapes.push_back(cur);
        }
        if (cur.size() != 1 || layers.back().kind != LayerKind::Dense)
            throw InvalidInput("architecture must end in a dense layer producing logits");
        return shapes;
    }

    std::size_t num_classes() const { return layer_shapes().back()[0]; }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < input_shape.size(); ++i) {
            if (i) s += 'x';
            s += std::to_string(input_shape[i]);
        }
        s += '|';
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (l) s += ',';
            const auto& spec = layers[l];
            switch (spec.kind) {
                case LayerKind::Dense: s += "dense:" + std::to_string(spec.units); break;
                case LayerKind::Conv2D:
                    s += "conv:" + std::to_string(spec.units) + ":" + std::to_string(spec.kernel);
                    break;
                case LayerKind::ReLU: s += "relu"; break;
                case LayerKind::GlobalAvgPool: s += "gap"; break;
            }
        }
        return s;
    }

    static Architecture parse(std::string_view text) {
        const auto bar = text.find('|');
        if (bar == std::string_view::npos)
            throw ConfigError("architecture '" + std::string(text) + "' lacks '|' between input and layers");
        Architecture a;
        for (auto tok : detail::split(text.substr(0, bar), 'x')) a.input_shape.push_back(detail::parse_extent(tok, text));
        for (auto tok : detail::split(text.substr(bar + 1), ',')) {
            const auto parts = detail::split(tok, ':');
            if (parts[0] == "dense" && parts.size() == 2) {
                a.layers.push_back(LayerSpec::dense(detail::parse_extent(parts[1], text)));
            } else if (parts[0] == "conv" && parts.size() == 3) {
                a.layers.push_back(
                    LayerSpec::conv(detail::parse_extent(parts[1], text), detail::parse_extent(parts[2], text)));
            } else if (parts[0] == "relu" && parts.size() == 1) {
                a.layers.push_back(LayerSpec::relu());
            } else if (parts[0] == "gap" && parts.size() == 1) {
                a.layers.push_back(LayerSpec::gap());
            } else {
                throw ConfigError("unknown layer '" + std::string(tok) + "' in architecture");
            }
        }
        try {
            a.layer_shapes();
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
        return a;
    }

    /// conv(8,3x3) -> ReLU -> conv(16,3x3) -> ReLU -> GAP -> dense(C)
    static Architecture default_image(Shape input, std::size_t classes) {
        return {std::move(input),
                {LayerSpec::conv(8, 3), LayerSpec::relu(), LayerSpec::conv(16, 3), LayerSpec::relu(),
                 LayerSpec::gap(), LayerSpec::dense(classes)}};
    }

    /// dense(hidden) -> ReLU -> dense(C)
    static Architecture default_vector(std::size_t features, std::size_t classes, std::size_t hidden = 64) {
        return {{features}, {LayerSpec::dense(hidden), LayerSpec::relu(), LayerSpec::dense(classes)}};
    }
};

/// Parameters of one layer. Empty for parameter-free layers.
///
/// Dense weights are [out][in]; conv weights are [filter][ky][kx][in_channel].
struct ParamBlock {
    std::vector<double> weights;
    std::vector<double> bias;

    std::size_t size() const noexcept { return weights.size() + bias.size(); }
    friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

using ParamSet = std::vector<ParamBlock>;

inline std::size_t parameter_count(const ParamSet& params) {
    std::size_t n = 0;
    for (const auto& b : params) n += b.size();
    return n;
}

inline bool same_structure(const ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t l = 0; l < a.size(); ++l)
        if (a[l].weights.size() != b[l].weights.size() || a[l].bias.size() != b[l].bias.size()) return false;
    return true;
}

inline ParamSet zeros_like(const ParamSet& params) {
    ParamSet z(params.size());
    for (std::size_t l = 0; l < params.size(); ++l) {
        z[l].weights.assign(params[l].weights.size(), 0.0);
        z[l].bias.assign(params[l].bias.size(), 0.0);
    }
    return z;
}

/// Visit every scalar of `a` together with the matching scalar of `b`.
template <typename A, typename B, typename F>
void for_each_pair(A& a, B& b, F&& f) {
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t i = 0; i < a[l].weights.size(); ++i) f(a[l].weights[i], b[l].weights[i]);
        for (std::size_t i = 0; i < a[l].bias.size(); ++i) f(a[l].bias[i], b[l].bias[i]);
    }
}

/// Flat view index -> scalar reference, layer order, weights before bias.
template <typename P>
auto& param_at(P& params, std::size_t flat) {
    for (auto& b : params) {
        if (flat < b.weights.size()) return b.weights[flat];
        flat -= b.weights.size();
        if (flat < b.bias.size()) return b.bias[flat];
        flat -= b.bias.size();
    }
    throw InvalidInput("parameter index out of range");
}

inline std::vector<double> flatten(const ParamSet& params) {
    std::vector<double> out;
    out.reserve(parameter_count(params));
    for (const auto& b : params) {
        out.insert(out.end(), b.weights.begin(), b.weights.end());
        out.insert(out.end(), b.bias.begin(), b.bias.end());
    }
    return out;
}

inline void scale(ParamSet& p, double s) {
    for (auto& b : p) {
        for (double& w : b.weights) w *= s;
        for (double& w : b.bias) w *= s;
    }
}

/// Student (or teacher) network: architecture plus trainable parameters.
struct ModelState {
    Architecture arch;
    ParamSet params;

    friend bool operator==(const ModelState&, const ModelState&) = default;

    std::size_t parameter_count() const { return ncl::parameter_count(params); }

    /// All-zero parameters; handy for tests.
    static ModelState zeros(Architecture arch) {
        ModelState m{std::move(arch), {}};
        m.params = zeros_like(allocate(m.arch));
        return m;
    }

    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    static ModelState he_uniform(Architecture arch, std::uint64_t seed) {
        ModelState m{std::move(arch), {}};
        m.params = allocate(m.arch);
        Rng rng(seed, Stream::Init);
        Shape cur = m.arch.input_shape;
        const auto shapes = m.arch.layer_shapes();
        for (std::size_t l = 0; l < m.arch.layers.size(); ++l) {
            const auto& spec = m.arch.layers[l];
            std::size_t fan_in = 0;
            if (spec.kind == LayerKind::Dense) fan_in = shape_size(cur);
            if (spec.kind == LayerKind::Conv2D) fan_in = spec.kernel * spec.kernel * cur[2];
            if (fan_in > 0) {
                const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
                for (double& w : m.params[l].weights) w = rng.uniform(-limit, limit);
            }
            cur = shapes[l];
        }
        return m;
    }

private:
    static ParamSet allocate(const Architecture& arch) {
        const auto shapes = arch.layer_shapes();
        ParamSet p(arch.layers.size());
        Shape cur = arch.input_shape;
        for (std::size_t l = 0; l < arch.layers.size(); ++l) {
            const auto& spec = arch.layers[l];
            if (spec.kind == LayerKind::Dense) {
                p[l].weights.assign(spec.units * shape_size(cur), 0.0);
                p[l].bias.assign(spec.units, 0.0);
            } else if (spec.kind == LayerKind::Conv2D) {
                p[l].weights.assign(spec.units * spec.kernel * spec.kernel * cur[2], 0.0);
                p[l].bias.assign(spec.units, 0.0);
            }
            cur = shapes[l];
        }
        return p;
    }
};

/// Softmax output for one sample.
struct ProbDist {
    std::vector<double> probs;

    std::size_t size() const noexcept { return probs.size(); }
    double operator[](std::size_t j) const { return probs[j]; }
    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    friend bool operator==(const ProbDist&, const ProbDist&) = default;
};

/// Max-subtracted softmax.
inline ProbDist softmax(std::span<const double> logits) {
    ProbDist out{std::vector<double>(logits.size())};
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out.probs[j] = std::exp(logits[j] - mx);
        sum += out.probs[j];
    }
    for (double& v : out.probs) v /= sum;
    return out;
}

/// Pull a gradient w.r.t. probabilities back to the logits: J^T dp with J = diag(p) - p p^T.
inline std::vector<double> softmax_backward(const ProbDist& p, std::span<const double> dprobs) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * dprobs[j];
    std::vector<double> dz(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) dz[k] = p[k] * (dprobs[k] - dot);
    return dz;
}

/// Activations recorded by a forward pass: acts[0] is the input, acts[l + 1]
/// the output of layer l, acts.back() the logits.
struct Trace {
    std::vector<std::vector<double>> acts;
    std::span<const double> logits() const { return acts.back(); }
};

namespace detail {

inline void conv_forward(const Shape& in_shape, std::size_t filters, std::size_t k, const ParamBlock& p,
                         std::span<const double> in, std::vector<double>& out) {
    const std::size_t H = in_shape[0], W = in_shape[1], Ci = in_shape[2];
    const long pad = static_cast<long>(k / 2);
    out.assign(H * W * filters, 0.0);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t o = 0; o < filters; ++o) {
                double acc = p.bias[o];
                for (std::size_t dy = 0; dy < k; ++dy) {
                    const long y = static_cast<long>(h + dy) - pad;
                    if (y < 0 || y >= static_cast<long>(H)) continue;
                    for (std::size_t dx = 0; dx < k; ++dx) {
                        const long x = static_cast<long>(w + dx) - pad;
                        if (x < 0 || x >= static_cast<long>(W)) continue;
                        const double* wrow = &p.weights[((o * k + dy) * k + dx) * Ci];
                        const double* irow = &in[(static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) * Ci];
                        for (std::size_t c = 0; c < Ci; ++c) acc += wrow[c] * irow[c];
                    }
                }
                out[(h * W + w) * filters + o] = acc;
            }
}

inline void conv_backward(const Shape& in_shape, std::size_t filters, std::size_t k, const ParamBlock& p,
                          std::span<const double> in, std::span<const double> gout, ParamBlock& grad,
                          std::vector<double>& gin) {
    const std::size_t H = in_shape[0], W = in_shape[1], Ci = in_shape[2];
    const long pad = static_cast<long>(k / 2);
    gin.assign(in.size(), 0.0);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t o = 0; o < filters; ++o) {
                const double g = gout[(h * W + w) * filters + o];
                if (g == 0.0) continue;
                grad.bias[o] += g;
                for (std::size_t dy = 0; dy < k; ++dy) {
                    const long y = static_cast<long>(h + dy) - pad;
                    if (y < 0 || y >= static_cast<long>(H)) continue;
                    for (std::size_t dx = 0; dx < k; ++dx) {
                        const long x = static_cast<long>(w + dx) - pad;
                        if (x < 0 || x >= static_cast<long>(W)) continue;
                        const std::size_t widx = ((o * k + dy) * k + dx) * Ci;
                        const std::size_t iidx = (static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)) * Ci;
                        for (std::size_t c = 0; c < Ci; ++c) {
                            grad.weights[widx + c] += g * in[iidx + c];
                            gin[iidx + c] += g * p.weights[widx + c];
                        }
                    }
                }
            }
}

}  // namespace detail

/// Forward one sample, recording every activation.
inline Trace forward_trace(const ModelState& model, std::span<const double> x) {
    const auto shapes = model.arch.layer_shapes();
    if (x.size() != shape_size(model.arch.input_shape))
        throw InvalidInput("sample has " + std::to_string(x.size()) + " values, architecture expects " +
                           shape_string(model.arch.input_shape));
    Trace t;
    t.acts.reserve(model.arch.layers.size() + 1);
    t.acts.emplace_back(x.begin(), x.end());
    Shape cur = model.arch.input_shape;
    for (std::size_t l = 0; l < model.arch.layers.size(); ++l) {
        const auto& spec = model.arch.layers[l];
        const auto& in = t.acts.back();
        std::vector<double> out;
        switch (spec.kind) {
            case LayerKind::Dense: {
                const auto& p = model.params[l];
                const std::size_t n_in = in.size();
                out.resize(spec.units);
                for (std::size_t o = 0; o < spec.units; ++o) {
                    double acc = p.bias[o];
                    const double* wrow = &p.weights[o * n_in];
                    for (std::size_t i = 0; i < n_in; ++i) acc += wrow[i] * in[i];
                    out[o] = acc;
                }
                break;
            }
            case LayerKind::Conv2D:
                detail::conv_forward(cur, spec.units, spec.kernel, model.params[l], in, out);
                break;
            case LayerKind::ReLU:
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] < 0.0 ? 0.0 : in[i];  // NaN passes through
                break;
            case LayerKind::GlobalAvgPool: {
                const std::size_t hw = cur[0] * cur[1], ch = cur[2];
                out.assign(ch, 0.0);
                for (std::size_t s = 0; s < hw; ++s)
                    for (std::size_t c = 0; c < ch; ++c) out[c] += in[s * ch + c];
                for (double& v : out) v /= static_cast<double>(hw);
                break;
            }
        }
        t.acts.push_back(std::move(out));
        cur = shapes[l];
    }
    return t;
}

inline ProbDist predict(const ModelState& model, std::span<const double> x) {
    return softmax(forward_trace(model, x).logits());
}

/// Softmax outputs for every row of `batch` (shape B x input_shape).
inline std::vector<ProbDist> forward(const ModelState& model, const Tensor& batch) {
    if (batch.rank() == 0 || batch.row_shape() != model.arch.input_shape)
        throw InvalidInput("batch shape " + shape_string(batch.shape()) + " does not match input " +
                           shape_string(model.arch.input_shape));
    std::vector<ProbDist> out;
    out.reserve(batch.extent(0));
    for (std::size_t i = 0; i < batch.extent(0); ++i) out.push_back(predict(model, batch.row(i)));
    return out;
}

/// Accumulate into `grads` the parameter gradient for one traced sample
/// given dL/dlogits. Returns dL/dinput.
inline std::vector<double> backward_trace(const ModelState& model, const Trace& trace,
                                          std::span<const double> dlogits, ParamSet& grads) {
    const auto shapes = model.arch.layer_shapes();
    if (dlogits.size() != trace.logits().size())
        throw InvalidInput("logit gradient has " + std::to_string(dlogits.size()) + " entries, expected " +
                           std::to_string(trace.logits().size()));
    std::vector<double> g(dlogits.begin(), dlogits.end());
    std::vector<double> gin;
    for (std::size_t l = model.arch.layers.size(); l-- > 0;) {
        const auto& spec = model.arch.layers[l];
        const auto& in = trace.acts[l];
        const Shape& in_shape = l == 0 ? model.arch.input_shape : shapes[l - 1];
        switch (spec.kind) {
            case LayerKind::Dense: {
                const auto& p = model.params[l];
                auto& gp = grads[l];
                const std::size_t n_in = in.size();
                gin.assign(n_in, 0.0);
                for (std::size_t o = 0; o < spec.units; ++o) {
                    const double go = g[o];
                    gp.bias[o] += go;
                    if (go == 0.0) continue;
                    const double* wrow = &p.weights[o * n_in];
                    double* grow = &gp.weights[o * n_in];
                    for (std::size_t i = 0; i < n_in; ++i) {
                        grow[i] += go * in[i];
                        gin[i] += go * wrow[i];
                    }
                }
                break;
            }
            case LayerKind::Conv2D:
                detail::conv_backward(in_shape, spec.units, spec.kernel, model.params[l], in, g, grads[l], gin);
                break;
            case LayerKind::ReLU:
                gin.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) gin[i] = in[i] > 0.0 ? g[i] : 0.0;
                break;
            case LayerKind::GlobalAvgPool: {
                const std::size_t hw = in_shape[0] * in_shape[1], ch = in_shape[2];
                gin.resize(hw * ch);
                for (std::size_t s = 0; s < hw; ++s)
                    for (std::size_t c = 0; c < ch; ++c) gin[s * ch + c] = g[c] / static_cast<double>(hw);
                break;
            }
        }
        std::swap(g, gin);
    }
    return g;
}

/// Parameter gradients for a batch given per-sample gradients w.r.t. the
/// logits (shape B x C). Samples are reduced in index order.
inline ParamSet backward(const ModelState& model, const Tensor& batch, const Tensor& logit_grad) {
    if (batch.rank() == 0 || batch.row_shape() != model.arch.input_shape)
        throw InvalidInput("batch shape " + shape_string(batch.shape()) + " does not match input " +
                           shape_string(model.arch.input_shape));
    const std::size_t C = model.arch.num_classes();
    if (logit_grad.shape() != Shape{batch.extent(0), C})
        throw InvalidInput("loss gradient shape " + shape_string(logit_grad.shape()) + " does not match " +
                           shape_string({batch.extent(0), C}));
    ParamSet grads = zeros_like(model.params);
    for (std::size_t i = 0; i < batch.extent(0); ++i)
        backward_trace(model, forward_trace(model, batch.row(i)), logit_grad.row(i), grads);
    return grads;
}

}  // namespace ncl

#endif  // NCL_NN_HPP
