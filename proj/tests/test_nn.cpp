#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ncl/adam.hpp"
#include "ncl/checkpoint.hpp"
#include "ncl/grad_check.hpp"
#include "ncl/nn.hpp"

using namespace ncl;

namespace {

Tensor random_batch(const Shape& sample, std::size_t n, std::uint64_t seed) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    Tensor t(s);
    Rng rng(seed);
    for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
    return t;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.uniform_index(classes));
    return y;
}

}  // namespace

TEST(Architecture, ParseAndPrintRoundTrip) {
    const std::string text = "8x8x1|conv:8:3,relu,conv:16:3,relu,gap,dense:10";
    const auto a = Architecture::parse(text);
    EXPECT_EQ(a.to_string(), text);
    EXPECT_EQ(a, Architecture::default_image({8, 8, 1}, 10));
    EXPECT_EQ(a.num_classes(), 10u);
}

TEST(Architecture, RejectsMalformedDescriptors) {
    EXPECT_THROW(Architecture::parse("16"), ConfigError);
    EXPECT_THROW(Architecture::parse("16|dense:0"), ConfigError);
    EXPECT_THROW(Architecture::parse("16|dense:4,relu"), ConfigError);
    EXPECT_THROW(Architecture::parse("16|conv:4:3,dense:2"), ConfigError);
    EXPECT_THROW(Architecture::parse("4x4x1|conv:4:2,gap,dense:2"), ConfigError);
    EXPECT_THROW(Architecture::parse("16|pool,dense:2"), ConfigError);
}

TEST(Forward, ZeroModelGivesUniform) {
    const auto m = ModelState::zeros(Architecture::default_vector(7, 10));
    const auto out = forward(m, random_batch({7}, 3, 1));
    ASSERT_EQ(out.size(), 3u);
    for (const auto& p : out)
        for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(Forward, IdentityDenseOnOneHotPicksHotIndex) {
    Architecture a{{5}, {LayerSpec::dense(5)}};
    auto m = ModelState::zeros(a);
    for (std::size_t i = 0; i < 5; ++i) m.params[0].weights[i * 5 + i] = 3.0;
    for (std::size_t hot = 0; hot < 5; ++hot) {
        Tensor x({1, 5});
        x[hot] = 1.0;
        const auto p = forward(m, x)[0];
        EXPECT_EQ(p.argmax(), hot);
        // logits are 3 at the hot index and 0 elsewhere
        EXPECT_NEAR(p[hot], std::exp(3.0) / (std::exp(3.0) + 4.0), 1e-15);
    }
}

TEST(Forward, DeterministicAndShapeChecked) {
    const auto m = ModelState::he_uniform(Architecture::default_image({6, 6, 2}, 4), 3);
    const auto b = random_batch({6, 6, 2}, 4, 9);
    EXPECT_EQ(forward(m, b), forward(m, b));
    EXPECT_THROW(forward(m, random_batch({6, 5, 2}, 4, 9)), InvalidInput);
}

TEST(Softmax, ProbDistInvariantsOverRandomLogits) {
    Rng rng(77);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> z(2 + rng.uniform_index(12));
        for (double& v : z) v = rng.uniform(-50.0, 50.0);
        const auto p = softmax(z);
        double s = 0.0;
        for (double v : p.probs) {
            ASSERT_TRUE(std::isfinite(v));
            ASSERT_GT(v, 0.0);
            ASSERT_LE(v, 1.0);
            s += v;
        }
        ASSERT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Backward, ZeroAndScaledGradients) {
    const auto m = ModelState::he_uniform(Architecture::default_image({5, 5, 1}, 3), 4);
    const auto b = random_batch({5, 5, 1}, 3, 5);
    Tensor g({3, 3});
    for (double v : flatten(backward(m, b, g))) EXPECT_EQ(v, 0.0);

    Rng rng(6);
    for (double& v : g.values()) v = rng.uniform(-1, 1);
    Tensor g2 = g;
    for (double& v : g2.values()) v *= 2.0;
    const auto a = backward(m, b, g), a2 = backward(m, b, g2);
    ASSERT_TRUE(same_structure(a, m.params));
    const auto fa = flatten(a), fa2 = flatten(a2);
    for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_NEAR(fa2[i], 2.0 * fa[i], 1e-14 * (1 + std::abs(fa[i])));
    EXPECT_THROW(backward(m, b, Tensor({3, 4})), InvalidInput);
}

TEST(Backward, TwoLayerNetMatchesFiniteDifferences) {
    const auto m = ModelState::he_uniform(Architecture::default_vector(6, 4, 8), 11);
    const auto b = random_batch({6}, 3, 12);
    const auto y = random_labels(3, 4, 13);
    const auto r = grad_check(m, b, y, 1e-4);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
}

// Every layer kind, 20 random small nets each.
TEST(Backward, EveryLayerKindAgreesWithFiniteDifferences) {
    const std::vector<std::string> nets = {
        "5|dense:3",
        "6|dense:7,relu,dense:3",
        "4x4x2|conv:3:3,relu,gap,dense:3",
        "5x5x1|conv:2:3,conv:2:1,gap,dense:2",
        "3x3x2|conv:2:3,relu,dense:4",
    };
    for (const auto& text : nets) {
        const auto arch = Architecture::parse(text);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto m = ModelState::he_uniform(arch, 100 + seed);
            // Redraw batches that put a ReLU input within reach of the step.
            auto b = random_batch(arch.input_shape, 3, 200 + seed);
            for (std::uint64_t k = 1; relu_margin(m, b) < 1e-3; ++k)
                b = random_batch(arch.input_shape, 3, 200 + seed + 1000 * k);
            const auto y = random_labels(3, arch.num_classes(), 300 + seed);
            const auto r = grad_check(m, b, y, 1e-4);
            EXPECT_TRUE(r.passed) << text << " seed " << seed << " err " << r.max_relative_error;
        }
    }
}

TEST(Backward, RepeatedTrainingIsBitIdentical) {
    auto run = [] {
        auto m = ModelState::he_uniform(Architecture::default_image({4, 4, 1}, 3), 21);
        auto opt = AdamState::for_model(m, 0.01);
        const auto b = random_batch({4, 4, 1}, 5, 22);
        const auto y = random_labels(5, 3, 23);
        for (int k = 0; k < 5; ++k) adam_step(m, cross_entropy_gradient(m, b, y), opt);
        return m;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    auto m = ModelState::he_uniform(Architecture::default_vector(4, 3), 1);
    const auto before = m;
    auto opt = AdamState::for_model(m);
    adam_step(m, zeros_like(m.params), opt);
    EXPECT_EQ(m, before);
    EXPECT_EQ(opt.step, 1u);
}

TEST(Adam, SingleAndTwoStepScalarTrace) {
    Architecture a{{1}, {LayerSpec::dense(1)}};
    auto m = ModelState::zeros(a);
    auto opt = AdamState::for_model(m, 0.001, 0.9, 0.999, 1e-8);
    ParamSet g = zeros_like(m.params);
    g[0].weights[0] = 1.0;
    adam_step(m, g, opt);
    EXPECT_DOUBLE_EQ(m.params[0].weights[0], -0.0009999999900000003);
    EXPECT_EQ(m.params[0].bias[0], 0.0);
    g[0].weights[0] = -2.0;
    adam_step(m, g, opt);
    // reference recurrence evaluated independently in double precision
    EXPECT_NEAR(m.params[0].weights[0], -0.0006338964652792519, 1e-18);
    EXPECT_EQ(opt.step, 2u);
}

TEST(Adam, NonFiniteGradientNamesLayerAndLeavesStateUntouched) {
    auto m = ModelState::he_uniform(Architecture::default_vector(4, 3), 1);
    auto opt = AdamState::for_model(m);
    const auto before = m;
    ParamSet g = zeros_like(m.params);
    g[2].bias[1] = std::nan("");
    try {
        adam_step(m, g, opt);
        FAIL() << "expected TrainingDiverged";
    } catch (const TrainingDiverged& e) {
        EXPECT_EQ(e.layer(), 2);
    }
    EXPECT_EQ(m, before);
    EXPECT_EQ(opt.step, 0u);
}

TEST(GradCheck, LinearModelPassesTightTolerance) {
    const auto m = ModelState::he_uniform(Architecture{{5}, {LayerSpec::dense(4)}}, 31);
    const auto b = random_batch({5}, 3, 32);
    const auto r = grad_check(m, b, random_labels(3, 4, 33), 1e-6);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradCheck, ConvReluDensePasses) {
    const auto m = ModelState::he_uniform(Architecture::parse("4x4x1|conv:3:3,relu,dense:3"), 41);
    const auto b = random_batch({4, 4, 1}, 3, 42);
    const auto r = grad_check(m, b, random_labels(3, 3, 43), 1e-4);
    EXPECT_TRUE(r.passed) << r.max_relative_error;
}

TEST(GradCheck, CorruptedGradientFails) {
    const auto m = ModelState::he_uniform(Architecture::default_vector(5, 3, 6), 51);
    const auto b = random_batch({5}, 3, 52);
    const auto y = random_labels(3, 3, 53);
    auto analytic = cross_entropy_gradient(m, b, y);
    analytic[0].weights[4] = -analytic[0].weights[4];
    const auto numeric =
        numeric_gradient(m, [&](const ModelState& mm) { return mean_cross_entropy(mm, b, y); });
    const auto r = compare_gradients(analytic, numeric, 1e-4);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.worst_index, 4u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto m = ModelState::he_uniform(Architecture::default_image({6, 6, 3}, 5), 61);
    const auto bytes = encode_checkpoint(m, CheckpointRole::Teacher);
    ASSERT_GE(bytes.size(), 7u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NTCK");
    EXPECT_EQ(bytes[4], 1);  // version, little-endian
    EXPECT_EQ(bytes[5], 0);
    const auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back.model, m);
    EXPECT_EQ(back.role, CheckpointRole::Teacher);
}

TEST(Checkpoint, RejectsCorruptFiles) {
    const auto m = ModelState::he_uniform(Architecture::default_vector(3, 2, 4), 62);
    auto bytes = encode_checkpoint(m, CheckpointRole::Student);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad_magic), FileError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(decode_checkpoint(truncated), FileError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_checkpoint(trailing), FileError);
}
