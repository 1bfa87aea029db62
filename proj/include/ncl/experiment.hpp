#ifndef NCL_EXPERIMENT_HPP
#define NCL_EXPERIMENT_HPP

// Reproducible experiment runs: JSON configuration, data preparation, and
// the run directory
//
//   <out>/config.snapshot      resolved configuration (JSON)
//   <out>/noise_manifest.csv   index,clean_label,noisy_label,is_clean
//   <out>/metrics.csv          one row per epoch
//   <out>/kl_final.csv         per-sample two-view KL after the last epoch
//   <out>/checkpoints/         student/teacher (final), best student, run state
//   <out>/plots/               accuracy.svg, precision.svg, kl_hist.svg

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncl/checkpoint.hpp"
#include "ncl/data_io.hpp"
#include "ncl/metrics.hpp"
#include "ncl/noise.hpp"
#include "ncl/trainer.hpp"

namespace ncl {

enum class DataSource { Synthetic, Csv, Idx };
enum class Normalization { None, Standardize };

struct DatasetSpec {
    DataSource source = DataSource::Synthetic;
    SyntheticSpec synthetic{};
    std::string train_path;         // CSV file or IDX images
    std::string train_labels_path;  // IDX labels
    std::string test_path;          // optional held-out set; empty means split
    std::string test_labels_path;
    std::size_t num_classes = 0;
    double train_fraction = 0.8;
    Normalization normalization = Normalization::None;
};

struct ExperimentConfig {
    TrainConfig train;
    DatasetSpec dataset;
    NoiseSpec noise;
    std::optional<Architecture> architecture;  // default picked from the data shape
    std::optional<double> tau;                 // default from the noise spec
    std::size_t hidden_units = 64;
};

struct PreparedData {
    LabeledDataset train;  // noisy labels
    LabeledDataset test;   // clean labels
    std::optional<FeatureStats> stats;
};

inline PreparedData prepare_data(const DatasetSpec& spec, const NoiseSpec& noise, std::uint64_t seed) {
    LabeledDataset full, test;
    bool have_test = false;
    switch (spec.source) {
        case DataSource::Synthetic: {
            SyntheticSpec s = spec.synthetic;
            s.seed = seed;
            full = make_synthetic(s);
            break;
        }
        case DataSource::Csv:
            full = load_csv_dataset(spec.train_path, spec.num_classes);
            if (!spec.test_path.empty()) {
                test = load_csv_dataset(spec.test_path, full.num_classes);
                have_test = true;
            }
            break;
        case DataSource::Idx:
            full = load_idx(spec.train_path, spec.train_labels_path, spec.num_classes);
            if (!spec.test_path.empty()) {
                test = load_idx(spec.test_path, spec.test_labels_path, full.num_classes);
                have_test = true;
            }
            break;
    }
    PreparedData out;
    if (have_test) {
        out.train = std::move(full);
        out.test = std::move(test);
    } else {
        auto sp = split(full, spec.train_fraction, seed);
        out.train = std::move(sp.train);
        out.test = std::move(sp.test);
    }
    if (spec.normalization == Normalization::Standardize) {
        out.stats = FeatureStats::fit(out.train);
        out.stats->apply(out.train);
        out.stats->apply(out.test);
    }
    NoiseSpec ns = noise;
    ns.seed = seed;
    out.train = inject(out.train, ns);
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline std::string source_name(DataSource s) {
    return s == DataSource::Synthetic ? "synthetic" : s == DataSource::Csv ? "csv" : "idx";
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    const auto& t = c.train;
    json j;
    j["mode"] = std::string(mode_name(t.mode));
    j["seed"] = t.seed;
    j["lambda"] = t.lambda;
    j["gamma"] = t.gamma;
    j["learning_rate"] = t.learning_rate;
    j["batch_size"] = t.batch_size;
    j["epochs"] = t.epochs;
    j["t_k"] = t.t_k;
    j["tau"] = t.tau;
    j["transform"] = std::string(transform_name(t.transform.tag));
    j["scale_crop"] = {{"intermediate", t.transform.intermediate_size},
                       {"crop", t.transform.crop_size},
                       {"resampling", t.transform.resampling == Resampling::Bilinear ? "bilinear" : "nearest"}};
    j["ema_cadence"] = t.ema_cadence == EmaCadence::Epoch ? "epoch" : "iteration";
    j["lr_schedule"] = t.lr_schedule == LrSchedule::Constant ? "constant" : "linear";
    j["two_view_eval"] = t.two_view_eval;
    j["record_wall_time"] = t.record_wall_time;
    if (c.architecture) j["architecture"] = c.architecture->to_string();
    j["hidden_units"] = c.hidden_units;
    const auto& d = c.dataset;
    json dj;
    dj["source"] = detail::source_name(d.source);
    if (d.source == DataSource::Synthetic) {
        dj["classes"] = d.synthetic.classes;
        dj["per_class"] = d.synthetic.per_class;
        dj["dim"] = d.synthetic.dim;
        dj["separation"] = d.synthetic.separation;
        dj["noise_std"] = d.synthetic.noise_std;
    } else {
        dj["train_path"] = d.train_path;
        if (d.source == DataSource::Idx) dj["train_labels_path"] = d.train_labels_path;
        if (!d.test_path.empty()) dj["test_path"] = d.test_path;
        if (!d.test_labels_path.empty()) dj["test_labels_path"] = d.test_labels_path;
        dj["num_classes"] = d.num_classes;
    }
    dj["train_fraction"] = d.train_fraction;
    dj["normalization"] = d.normalization == Normalization::None ? "none" : "standardize";
    j["dataset"] = dj;
    json nj;
    nj["kind"] = c.noise.kind == NoiseKind::Symmetric ? "symmetric" : "asymmetric";
    nj["rate"] = c.noise.rate;
    if (c.noise.kind == NoiseKind::Asymmetric) {
        json pairs = json::array();
        for (auto [a, b] : c.noise.pair_map) pairs.push_back({a, b});
        nj["pairs"] = pairs;
    }
    j["noise"] = nj;
    return j;
}

/// Parse a JSON configuration. Absent keys keep their defaults; `tau`
/// defaults to the noise spec's effective rate.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    auto& t = c.train;
    try {
        auto get = [&](const nlohmann::json& o, const char* key, auto& dst) {
            if (o.contains(key) && !o.at(key).is_null()) dst = o.at(key).get<std::decay_t<decltype(dst)>>();
        };
        std::string s;
        if (j.contains("mode")) t.mode = parse_mode(j.at("mode").get<std::string>());
        get(j, "seed", t.seed);
        get(j, "lambda", t.lambda);
        get(j, "gamma", t.gamma);
        get(j, "learning_rate", t.learning_rate);
        get(j, "batch_size", t.batch_size);
        get(j, "epochs", t.epochs);
        get(j, "t_k", t.t_k);
        if (j.contains("tau") && !j.at("tau").is_null()) c.tau = j.at("tau").get<double>();
        if (j.contains("transform")) t.transform.tag = parse_transform(j.at("transform").get<std::string>());
        if (j.contains("scale_crop")) {
            const auto& sc = j.at("scale_crop");
            get(sc, "intermediate", t.transform.intermediate_size);
            get(sc, "crop", t.transform.crop_size);
            if (sc.contains("resampling")) {
                s = sc.at("resampling").get<std::string>();
                if (s != "bilinear" && s != "nearest") throw ConfigError("unknown resampling '" + s + "'");
                t.transform.resampling = s == "bilinear" ? Resampling::Bilinear : Resampling::Nearest;
            }
        }
        if (j.contains("ema_cadence")) {
            s = j.at("ema_cadence").get<std::string>();
            if (s != "epoch" && s != "iteration") throw ConfigError("ema_cadence must be epoch or iteration");
            t.ema_cadence = s == "epoch" ? EmaCadence::Epoch : EmaCadence::Iteration;
        }
        if (j.contains("lr_schedule")) {
            s = j.at("lr_schedule").get<std::string>();
            if (s != "constant" && s != "linear") throw ConfigError("lr_schedule must be constant or linear");
            t.lr_schedule = s == "constant" ? LrSchedule::Constant : LrSchedule::Linear;
        }
        get(j, "two_view_eval", t.two_view_eval);
        get(j, "record_wall_time", t.record_wall_time);
        if (j.contains("architecture") && !j.at("architecture").is_null())
            c.architecture = Architecture::parse(j.at("architecture").get<std::string>());
        get(j, "hidden_units", c.hidden_units);

        if (j.contains("dataset")) {
            const auto& dj = j.at("dataset");
            auto& d = c.dataset;
            if (dj.contains("source")) {
                s = dj.at("source").get<std::string>();
                if (s == "synthetic") d.source = DataSource::Synthetic;
                else if (s == "csv") d.source = DataSource::Csv;
                else if (s == "idx") d.source = DataSource::Idx;
                else throw ConfigError("unknown dataset source '" + s + "'");
            }
            get(dj, "classes", d.synthetic.classes);
            get(dj, "per_class", d.synthetic.per_class);
            get(dj, "dim", d.synthetic.dim);
            get(dj, "separation", d.synthetic.separation);
            get(dj, "noise_std", d.synthetic.noise_std);
            get(dj, "train_path", d.train_path);
            get(dj, "train_labels_path", d.train_labels_path);
            get(dj, "test_path", d.test_path);
            get(dj, "test_labels_path", d.test_labels_path);
            get(dj, "num_classes", d.num_classes);
            get(dj, "train_fraction", d.train_fraction);
            if (dj.contains("normalization")) {
                s = dj.at("normalization").get<std::string>();
                if (s != "none" && s != "standardize") throw ConfigError("normalization must be none or standardize");
                d.normalization = s == "none" ? Normalization::None : Normalization::Standardize;
            }
        }
        if (j.contains("noise")) {
            const auto& nj = j.at("noise");
            if (nj.contains("kind")) {
                s = nj.at("kind").get<std::string>();
                if (s != "symmetric" && s != "asymmetric") throw ConfigError("noise kind must be symmetric or asymmetric");
                c.noise.kind = s == "symmetric" ? NoiseKind::Symmetric : NoiseKind::Asymmetric;
            }
            get(nj, "rate", c.noise.rate);
            if (nj.contains("pairs"))
                for (const auto& p : nj.at("pairs")) c.noise.pair_map.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad configuration: ") + e.what());
    }
    if (c.noise.kind == NoiseKind::Asymmetric && c.noise.pair_map.empty()) {
        const std::size_t classes =
            c.dataset.source == DataSource::Synthetic ? c.dataset.synthetic.classes : c.dataset.num_classes;
        c.noise.pair_map = default_swap_pairs(classes);
    }
    t.tau = c.tau ? *c.tau : effective_tau(c.noise);
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline Architecture resolve_architecture(const ExperimentConfig& c, const LabeledDataset& train) {
    if (c.architecture) {
        if (c.architecture->input_shape != train.sample_shape())
            throw ConfigError("architecture input " + shape_string(c.architecture->input_shape) +
                              " does not match data " + shape_string(train.sample_shape()));
        if (c.architecture->num_classes() != train.num_classes)
            throw ConfigError("architecture output does not match the class count");
        return *c.architecture;
    }
    const Shape s = train.sample_shape();
    if (s.size() == 1) return Architecture::default_vector(s[0], train.num_classes, c.hidden_units);
    return Architecture::default_image(s, train.num_classes);
}

struct RunSummary {
    std::vector<EpochMetrics> metrics;
    RunState final_state;
    ModelState best_student;
    std::size_t best_epoch = 0;
    std::vector<double> final_kl;
    std::vector<std::string> warnings;
};

/// Train on prepared data without touching the filesystem.
inline RunSummary train_run(const ExperimentConfig& cfg, const PreparedData& data) {
    RunSummary out;
    out.warnings = cfg.train.validate();
    const Architecture arch = resolve_architecture(cfg, data.train);
    const Shape xt_shape = transformed_shape(cfg.train.transform, data.train.sample_shape());
    if (cfg.train.mode != Mode::Standard && xt_shape != data.train.sample_shape())
        throw ConfigError("transform output " + shape_string(xt_shape) + " does not match the network input " +
                          shape_string(data.train.sample_shape()));
    out.final_state = init_run(cfg.train, arch);
    double best = -1.0;
    for (std::size_t e = 0; e < cfg.train.epochs; ++e) {
        KlStats kl;
        auto m = run_epoch(out.final_state, data.train, data.test, cfg.train, &kl);
        if (m.test_accuracy > best) {
            best = m.test_accuracy;
            out.best_student = out.final_state.student;
            out.best_epoch = m.epoch;
        }
        out.metrics.push_back(m);
        if (e + 1 == cfg.train.epochs) out.final_kl = std::move(kl.per_sample);
    }
    return out;
}

/// Full run: prepare data, train, and write the run directory.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "checkpoints", ec);
    if (!ec) fs::create_directories(out_dir / "plots", ec);
    if (ec) throw FileError(out_dir.string() + ": cannot create run directory: " + ec.message());

    const auto data = prepare_data(cfg.dataset, cfg.noise, cfg.train.seed);
    svg::write_text(out_dir / "config.snapshot", to_json(cfg).dump(2) + "\n");
    write_manifest(data.train, out_dir / "noise_manifest.csv");

    auto summary = train_run(cfg, data);
    write_csv(summary.metrics, out_dir / "metrics.csv");
    write_kl_samples(summary.final_kl, out_dir / "kl_final.csv");
    save_checkpoint(out_dir / "checkpoints" / "final_student.ntck", summary.final_state.student, CheckpointRole::Student);
    save_checkpoint(out_dir / "checkpoints" / "final_teacher.ntck", summary.final_state.teacher.model,
                    CheckpointRole::Teacher);
    save_checkpoint(out_dir / "checkpoints" / "best_student.ntck", summary.best_student, CheckpointRole::Student);
    write_file_bytes(out_dir / "checkpoints" / "run_state.ntrs", encode_run_state(summary.final_state));
    render_plots(out_dir / "metrics.csv", out_dir / "noise_manifest.csv", out_dir / "kl_final.csv", out_dir / "plots");
    return summary;
}

}  // namespace ncl

#endif  // NCL_EXPERIMENT_HPP
