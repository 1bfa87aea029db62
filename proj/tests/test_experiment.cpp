#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncl/experiment.hpp"

using namespace ncl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json tiny_run() {
    return nlohmann::json::parse(R"({
        "mode": "proposed", "seed": 4, "epochs": 3, "t_k": 2, "batch_size": 16,
        "learning_rate": 0.005, "hidden_units": 8, "transform": "vector_mirror",
        "dataset": {"source": "synthetic", "classes": 3, "per_class": 20, "dim": 4, "separation": 3},
        "noise": {"kind": "symmetric", "rate": 0.3}
    })");
}

}  // namespace

TEST(Config, DefaultsAndDerivedTau) {
    const auto c = config_from_json(nlohmann::json::object());
    EXPECT_EQ(c.train.lambda, 0.5);
    EXPECT_EQ(c.train.gamma, 0.999);
    EXPECT_EQ(c.train.learning_rate, 1e-3);
    EXPECT_EQ(c.train.batch_size, 128u);
    EXPECT_EQ(c.train.ema_cadence, EmaCadence::Epoch);
    EXPECT_EQ(c.train.mode, Mode::Proposed);

    auto j = tiny_run();
    EXPECT_DOUBLE_EQ(config_from_json(j).train.tau, 0.3);
    j["noise"] = {{"kind", "asymmetric"}, {"rate", 0.4}};
    const auto asym = config_from_json(j);
    EXPECT_DOUBLE_EQ(asym.train.tau, 0.2);
    EXPECT_EQ(asym.noise.pair_map, default_swap_pairs(3));
    j["tau"] = 0.35;
    EXPECT_DOUBLE_EQ(config_from_json(j).train.tau, 0.35);
}

TEST(Config, ParsesEveryKey) {
    const auto c = config_from_json(nlohmann::json::parse(R"({
        "mode": "ablation-no-teacher", "lambda": 0.3, "gamma": 0.99, "ema_cadence": "iteration",
        "lr_schedule": "linear", "two_view_eval": true, "transform": "scale_crop",
        "scale_crop": {"intermediate": 12, "crop": 8, "resampling": "nearest"},
        "architecture": "8x8x1|conv:2:3,relu,gap,dense:4",
        "dataset": {"source": "idx", "train_path": "a", "train_labels_path": "b", "num_classes": 4,
                    "normalization": "standardize", "train_fraction": 0.7},
        "noise": {"kind": "asymmetric", "rate": 0.2, "pairs": [[0, 1], [2, 3]]}
    })"));
    EXPECT_EQ(c.train.mode, Mode::AblationNoTeacher);
    EXPECT_EQ(c.train.lambda, 0.3);
    EXPECT_EQ(c.train.ema_cadence, EmaCadence::Iteration);
    EXPECT_EQ(c.train.lr_schedule, LrSchedule::Linear);
    EXPECT_TRUE(c.train.two_view_eval);
    EXPECT_EQ(c.train.transform.tag, TransformTag::ScaleCrop);
    EXPECT_EQ(c.train.transform.crop_size, 8u);
    EXPECT_EQ(c.train.transform.resampling, Resampling::Nearest);
    ASSERT_TRUE(c.architecture.has_value());
    EXPECT_EQ(c.architecture->to_string(), "8x8x1|conv:2:3,relu,gap,dense:4");
    EXPECT_EQ(c.dataset.source, DataSource::Idx);
    EXPECT_EQ(c.dataset.normalization, Normalization::Standardize);
    EXPECT_EQ(c.noise.pair_map, (PairMap{{0, 1}, {2, 3}}));
    EXPECT_DOUBLE_EQ(c.train.tau, 0.1);

    // the snapshot parses back to the same configuration
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, RejectsBadValues) {
    auto bad = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
    EXPECT_THROW(bad(R"({"mode": "jocor"})"), ConfigError);
    EXPECT_THROW(bad(R"({"ema_cadence": "weekly"})"), ConfigError);
    EXPECT_THROW(bad(R"({"lambda": "half"})"), ConfigError);
    EXPECT_THROW(bad(R"({"transform": "shear"})"), ConfigError);
    EXPECT_THROW(bad(R"({"dataset": {"source": "cifar"}})"), ConfigError);
    EXPECT_THROW(bad(R"({"architecture": "4|relu"})"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), FileError);
}

TEST(Experiment, WritesRunDirectory) {
    const auto out = fs::temp_directory_path() / "ncl_experiment_run";
    fs::remove_all(out);
    const auto cfg = config_from_json(tiny_run());
    const auto summary = run_experiment(cfg, out);
    for (const char* f : {"config.snapshot", "noise_manifest.csv", "metrics.csv", "kl_final.csv",
                          "checkpoints/final_student.ntck", "checkpoints/final_teacher.ntck",
                          "checkpoints/best_student.ntck", "checkpoints/run_state.ntrs", "plots/accuracy.svg",
                          "plots/precision.svg", "plots/kl_hist.svg"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto rows = read_csv(out / "metrics.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(read_manifest(out / "noise_manifest.csv").size(), 48u);
    EXPECT_EQ(load_checkpoint(out / "checkpoints" / "final_student.ntck").model, summary.final_state.student);
    EXPECT_EQ(load_checkpoint(out / "checkpoints" / "final_teacher.ntck").role, CheckpointRole::Teacher);
    EXPECT_EQ(decode_run_state(read_file_bytes(out / "checkpoints" / "run_state.ntrs")), summary.final_state);
    for (const auto& m : rows) {
        EXPECT_GE(m.test_accuracy, 0.0);
        EXPECT_LE(m.test_accuracy, 1.0);
        EXPECT_LE(m.selected_count, 48u);
        EXPECT_EQ(m.wall_time_ms, 0);
    }
    EXPECT_EQ(config_from_json(nlohmann::json::parse(slurp(out / "config.snapshot"))).train.seed, 4u);
    fs::remove_all(out);
}

TEST(Experiment, SameSeedGivesIdenticalBytes) {
    const auto a = fs::temp_directory_path() / "ncl_experiment_a", b = fs::temp_directory_path() / "ncl_experiment_b";
    const auto cfg = config_from_json(tiny_run());
    run_experiment(cfg, a);
    run_experiment(cfg, b);
    for (const char* f : {"metrics.csv", "noise_manifest.csv", "checkpoints/final_student.ntck",
                          "checkpoints/final_teacher.ntck", "checkpoints/run_state.ntrs"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

    auto other = cfg;
    other.train.seed = 5;
    run_experiment(other, b);
    EXPECT_NE(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, NoKlAblationKeepsTeacherAndDropsKl) {
    auto j = tiny_run();
    j["mode"] = "ablation-no-kl";
    const auto cfg = config_from_json(j);
    const auto flags = mode_flags(cfg.train);
    EXPECT_EQ(flags.lambda, 0.0);
    EXPECT_TRUE(flags.use_teacher);
    const auto data = prepare_data(cfg.dataset, cfg.noise, cfg.train.seed);
    const auto s = train_run(cfg, data);
    EXPECT_EQ(s.metrics.size(), 3u);
}

TEST(Experiment, RejectsShapeMismatches) {
    auto j = tiny_run();
    j["architecture"] = "5|dense:3";
    const auto cfg = config_from_json(j);
    const auto data = prepare_data(cfg.dataset, cfg.noise, cfg.train.seed);
    EXPECT_THROW(train_run(cfg, data), ConfigError);
}

TEST(PrepareData, SplitBeforeNoiseAndCleanTestLabels) {
    const auto cfg = config_from_json(tiny_run());
    const auto d = prepare_data(cfg.dataset, cfg.noise, 4);
    EXPECT_EQ(d.train.size(), 48u);
    EXPECT_EQ(d.test.size(), 12u);
    for (auto m : d.test.clean_mask) EXPECT_EQ(m, 1);
    std::size_t noisy = 0;
    for (auto m : d.train.clean_mask) noisy += m ? 0 : 1;
    EXPECT_EQ(noisy, corrupted_count(0.3, 48));
}
