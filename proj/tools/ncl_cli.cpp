#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncl/experiment.hpp"

namespace fs = std::filesystem;

namespace {

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& mode,
              const std::string& out) {
    auto cfg = ncl::load_config(config_path);
    if (seed) cfg.train.seed = *seed;
    if (!mode.empty()) cfg.train.mode = ncl::parse_mode(mode);
    const fs::path out_dir = out.empty() ? fs::path("runs") / (std::string(ncl::mode_name(cfg.train.mode)) + "-seed" +
                                                             std::to_string(cfg.train.seed))
                                         : fs::path(out);
    for (const auto& w : cfg.train.validate()) std::cerr << "warning: " << w << "\n";
    const auto summary = ncl::run_experiment(cfg, out_dir);
    const auto& last = summary.metrics.back();
    std::printf("mode %s seed %llu: %zu epochs, final test accuracy %.4f, label precision %.4f, best %.4f (epoch %zu)\n",
                std::string(ncl::mode_name(cfg.train.mode)).c_str(), static_cast<unsigned long long>(cfg.train.seed),
                summary.metrics.size(), last.test_accuracy, last.label_precision,
                summary.metrics[summary.best_epoch - 1].test_accuracy, summary.best_epoch);
    std::printf("run directory: %s\n", out_dir.string().c_str());
    return 0;
}

int run_plot(const std::vector<std::string>& runs, std::vector<std::string> labels, const std::string& out) {
    if (!labels.empty() && labels.size() != runs.size())
        throw ncl::ConfigError("--label must be given once per run");
    std::vector<ncl::NamedRun> named;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const fs::path dir(runs[i]);
        const auto csv = fs::is_directory(dir) ? dir / "metrics.csv" : dir;
        std::string label = labels.empty() ? (fs::is_directory(dir) ? dir.filename().string() : dir.stem().string())
                                           : labels[i];
        named.push_back({label, ncl::read_csv(csv)});
    }
    ncl::render_curves(named, out);
    std::printf("wrote %s and %s\n", (fs::path(out) / "accuracy.svg").string().c_str(),
                (fs::path(out) / "precision.svg").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy-label training with two-view consistency, an EMA teacher and small-loss selection"};
    app.require_subcommand(1);

    std::string config_path, mode, out;
    std::optional<std::uint64_t> seed;
    auto* train = app.add_subcommand("train", "Run one experiment and write its run directory");
    train->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Override the configured seed");
    train->add_option("--mode", mode, "Override the mode")
        ->check(CLI::IsMember({"proposed", "standard", "ablation-no-kl", "ablation-no-teacher"}));
    train->add_option("--out", out, "Run directory (default runs/<mode>-seed<S>)");

    std::vector<std::string> runs, labels;
    std::string plot_out = "plots";
    auto* plot = app.add_subcommand("plot", "Overlay accuracy and precision curves of several runs");
    plot->add_option("runs", runs, "Run directories or metrics.csv files")->required();
    plot->add_option("--label", labels, "Legend label per run");
    plot->add_option("--out", plot_out, "Output directory");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return run_train(config_path, seed, mode, out);
        if (*plot) return run_plot(runs, labels, plot_out);
    } catch (const ncl::TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
