#ifndef NCL_METRICS_HPP
#define NCL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/noise.hpp"
#include "ncl/selection.hpp"

namespace ncl {

struct EpochMetrics {
    std::size_t epoch = 0;
    double test_accuracy = 0.0;
    double label_precision = 0.0;
    double r_of_t = 1.0;
    double mean_total_loss_selected = 0.0;
    double mean_kl_clean = 0.0;
    double mean_kl_noisy = 0.0;
    std::size_t selected_count = 0;
    std::int64_t wall_time_ms = 0;
};

/// Size-weighted running mean; merging batch means this way equals a flat
/// mean over all samples.
struct WeightedMean {
    double sum = 0.0;
    std::size_t count = 0;

    void add(double value) {
        sum += value;
        ++count;
    }
    void add_mean(double mean, std::size_t n) {
        sum += mean * static_cast<double>(n);
        count += n;
    }
    double value() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

struct BatchSelectionLog {
    std::size_t batch_size = 0;
    std::size_t selected = 0;
    std::size_t clean_hits = 0;
    double selected_loss_sum = 0.0;
};

/// Per-epoch selection bookkeeping. Keeps the raw per-batch log so the
/// aggregates can be audited.
class SelectionTally {
public:
    void add(const SelectionResult& r) {
        BatchSelectionLog b;
        b.batch_size = r.losses.size();
        b.selected = r.selected.size();
        b.clean_hits = r.clean_hits;
        for (std::size_t i : r.selected) b.selected_loss_sum += r.losses[i];
        add(b);
    }
    void add(const BatchSelectionLog& b) {
        log_.push_back(b);
        selected_ += b.selected;
        clean_hits_ += b.clean_hits;
        loss_sum_ += b.selected_loss_sum;
    }

    std::size_t selected() const noexcept { return selected_; }
    std::size_t clean_hits() const noexcept { return clean_hits_; }
    double precision() const {
        return selected_ == 0 ? 0.0 : static_cast<double>(clean_hits_) / static_cast<double>(selected_);
    }
    double mean_selected_loss() const { return selected_ == 0 ? 0.0 : loss_sum_ / static_cast<double>(selected_); }
    const std::vector<BatchSelectionLog>& log() const noexcept { return log_; }

private:
    std::vector<BatchSelectionLog> log_;
    std::size_t selected_ = 0;
    std::size_t clean_hits_ = 0;
    double loss_sum_ = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,test_accuracy,label_precision,r_of_t,mean_total_loss_selected,mean_kl_clean,mean_kl_noisy,selected_count,"
    "wall_time_ms";

inline std::string format_metrics_row(const EpochMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%lld", m.epoch, m.test_accuracy,
                  m.label_precision, m.r_of_t, m.mean_total_loss_selected, m.mean_kl_clean, m.mean_kl_noisy,
                  m.selected_count, static_cast<long long>(m.wall_time_ms));
    return buf;
}

inline std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
    std::string s = std::string(kMetricsHeader) + "\n";
    for (const auto& m : rows) s += format_metrics_row(m) + "\n";
    return s;
}

inline void write_csv(const std::vector<EpochMetrics>& rows, const std::filesystem::path& path) {
    if (rows.empty()) throw InvalidInput("no epochs to write to " + path.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path.string() + ": cannot open for writing");
    out << metrics_csv(rows);
    if (!out) throw FileError(path.string() + ": write failed");
}

inline std::vector<EpochMetrics> parse_metrics_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ": empty metrics file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader) throw ParseError(source + ": unexpected metrics header", 1);
    std::vector<EpochMetrics> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        EpochMetrics m;
        long long wall = 0;
        int consumed = 0;
        const int n = std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf,%zu,%lld%n", &m.epoch, &m.test_accuracy,
                                  &m.label_precision, &m.r_of_t, &m.mean_total_loss_selected, &m.mean_kl_clean,
                                  &m.mean_kl_noisy, &m.selected_count, &wall, &consumed);
        if (n != 9 || static_cast<std::size_t>(consumed) != line.size())
            throw ParseError(source + ": malformed metrics row", lineno);
        m.wall_time_ms = wall;
        rows.push_back(m);
    }
    if (rows.empty()) throw ParseError(source + ": no metric rows after header", lineno);
    return rows;
}

inline std::vector<EpochMetrics> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    return parse_metrics_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Static SVG plots

namespace svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
};

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colors[i % 6];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

/// Tick label: up to four significant digits, no trailing zeros.
inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

struct Frame {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 55;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string header(const Frame& f, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, bool percent_y) {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    s << "<line x1=\"" << f.left << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.width - f.right << "\" y2=\""
      << f.py(f.y0) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << f.left << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.left << "\" y2=\"" << f.py(f.y1)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double y = f.y0 + (f.y1 - f.y0) * i / 5.0;
        const double x = f.x0 + (f.x1 - f.x0) * i / 5.0;
        s << "<line x1=\"" << f.left - 4 << "\" y1=\"" << num(f.py(y)) << "\" x2=\"" << f.width - f.right
          << "\" y2=\"" << num(f.py(y)) << "\" stroke=\"#dddddd\"/>\n";
        s << "<text x=\"" << f.left - 8 << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">"
          << (percent_y ? tick(y * 100.0) : tick(y)) << "</text>\n";
        s << "<text x=\"" << num(f.px(x)) << "\" y=\"" << f.height - f.bottom + 18 << "\" text-anchor=\"middle\">"
          << tick(x) << "</text>\n";
    }
    s << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\"" << f.height - 12
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    s << "<text x=\"16\" y=\"" << f.height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << f.height / 2 << ")\">" << ylabel << "</text>\n";
    return s.str();
}

inline std::string legend(const Frame& f, const std::vector<Series>& series) {
    std::ostringstream s;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double y = f.top + 10 + 16.0 * static_cast<double>(i);
        const double x = f.width - f.right - 150;
        s << "<rect x=\"" << x << "\" y=\"" << y - 8 << "\" width=\"14\" height=\"8\" fill=\"" << series[i].color
          << "\"/>\n";
        s << "<text x=\"" << x + 20 << "\" y=\"" << y << "\">" << series[i].label << "</text>\n";
    }
    return s.str();
}

inline std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel, double y0, double y1, bool percent_y) {
    Frame f;
    f.y0 = y0;
    f.y1 = y1;
    f.x0 = 1e300;
    f.x1 = -1e300;
    for (const auto& s : series)
        for (double x : s.x) {
            f.x0 = std::min(f.x0, x);
            f.x1 = std::max(f.x1, x);
        }
    if (f.x0 >= 0.0) f.x0 = 0.0;  // epoch axes start at zero so ticks land on round values
    if (!(f.x1 > f.x0)) f.x1 = f.x0 + 1;
    std::ostringstream s;
    s << header(f, title, xlabel, ylabel, percent_y);
    for (const auto& ser : series) {
        s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < ser.x.size(); ++i) s << num(f.px(ser.x[i])) << "," << num(f.py(ser.y[i])) << " ";
        s << "\"/>\n";
    }
    if (series.size() > 1) s << legend(f, series);
    s << "</svg>\n";
    return s.str();
}

/// Two overlaid normalized histograms over shared bins.
inline std::string histogram(const std::vector<Series>& groups, std::size_t bins, const std::string& title,
                             const std::string& xlabel) {
    double hi = 0.0;
    for (const auto& g : groups)
        for (double v : g.y) hi = std::max(hi, v);
    if (hi <= 0.0) hi = 1.0;
    std::vector<std::vector<double>> freq(groups.size(), std::vector<double>(bins, 0.0));
    double ymax = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (double v : groups[g].y) {
            auto b = static_cast<std::size_t>(v / hi * static_cast<double>(bins));
            freq[g][std::min(b, bins - 1)] += 1.0;
        }
        if (!groups[g].y.empty())
            for (double& c : freq[g]) c /= static_cast<double>(groups[g].y.size());
        for (double c : freq[g]) ymax = std::max(ymax, c);
    }
    Frame f;
    f.x0 = 0;
    f.x1 = hi;
    f.y0 = 0;
    f.y1 = ymax > 0 ? ymax * 1.1 : 1.0;
    std::ostringstream s;
    s << header(f, title, xlabel, "fraction of samples", false);
    const double bw = hi / static_cast<double>(bins);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t b = 0; b < bins; ++b) {
            const double x = f.px(bw * static_cast<double>(b));
            const double w = f.px(bw * static_cast<double>(b + 1)) - x;
            s << "<rect x=\"" << num(x) << "\" y=\"" << num(f.py(freq[g][b])) << "\" width=\"" << num(w)
              << "\" height=\"" << num(f.py(0) - f.py(freq[g][b])) << "\" fill=\"" << groups[g].color
              << "\" fill-opacity=\"0.45\"/>\n";
        }
    s << legend(f, groups);
    s << "</svg>\n";
    return s.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw FileError(path.string() + ": write failed");
}

}  // namespace svg

inline constexpr const char* kKlSamplesHeader = "index,kl";

/// Per-sample KL between the two views, written at the end of training.
inline void write_kl_samples(const std::vector<double>& kl, const std::filesystem::path& path) {
    std::ostringstream s;
    s << kKlSamplesHeader << '\n';
    char buf[64];
    for (std::size_t i = 0; i < kl.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, kl[i]);
        s << buf;
    }
    svg::write_text(path, s.str());
}

inline std::vector<double> read_kl_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path.string() + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != kKlSamplesHeader) throw ParseError(path.string() + ": bad header", 1);
    std::vector<double> kl;
    std::size_t lineno = 1, idx = 0;
    double v = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (std::sscanf(line.c_str(), "%zu,%lf", &idx, &v) != 2 || idx != kl.size())
            throw ParseError(path.string() + ": malformed row", lineno);
        kl.push_back(v);
    }
    return kl;
}

struct NamedRun {
    std::string label;
    std::vector<EpochMetrics> metrics;
};

/// accuracy.svg and precision.svg, one curve per run.
inline void render_curves(const std::vector<NamedRun>& runs, const std::filesystem::path& out_dir) {
    if (runs.empty()) throw InvalidInput("no runs to plot");
    std::vector<svg::Series> acc, prec;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        svg::Series a{runs[i].label, {}, {}, svg::palette(i)}, p = a;
        for (const auto& m : runs[i].metrics) {
            a.x.push_back(static_cast<double>(m.epoch));
            a.y.push_back(m.test_accuracy);
            p.x.push_back(static_cast<double>(m.epoch));
            p.y.push_back(m.label_precision);
        }
        acc.push_back(std::move(a));
        prec.push_back(std::move(p));
    }
    std::filesystem::create_directories(out_dir);
    svg::write_text(out_dir / "accuracy.svg",
                    svg::line_chart(acc, "Test accuracy", "epoch", "test accuracy (%)", 0.0, 1.0, true));
    svg::write_text(out_dir / "precision.svg",
                    svg::line_chart(prec, "Label precision", "epoch", "label precision (%)", 0.0, 1.0, true));
}

/// Histogram of final per-sample KL split by the manifest's clean flag.
inline void render_kl_histogram(const std::vector<double>& kl, const std::vector<bool>& is_clean,
                                const std::filesystem::path& out_dir) {
    if (kl.size() != is_clean.size()) throw InvalidInput("KL samples and manifest have different lengths");
    svg::Series clean{"clean", {}, {}, svg::palette(0)}, noisy{"noisy", {}, {}, svg::palette(1)};
    for (std::size_t i = 0; i < kl.size(); ++i) (is_clean[i] ? clean : noisy).y.push_back(kl[i]);
    std::filesystem::create_directories(out_dir);
    svg::write_text(out_dir / "kl_hist.svg",
                    svg::histogram({clean, noisy}, 30, "KL divergence between two views", "symmetric KL"));
}

/// Render all three plots from a run directory's artifacts. Inputs are
/// parsed before anything is written.
inline void render_plots(const std::filesystem::path& metrics_csv, const std::filesystem::path& manifest_csv,
                         const std::filesystem::path& kl_csv, const std::filesystem::path& out_dir) {
    auto metrics = read_csv(metrics_csv);
    const auto manifest = read_manifest(manifest_csv);
    const auto kl = read_kl_samples(kl_csv);
    std::vector<bool> clean;
    for (const auto& r : manifest) clean.push_back(r.is_clean);
    if (kl.size() != clean.size()) throw InvalidInput("KL samples and manifest have different lengths");
    render_curves({{"run", std::move(metrics)}}, out_dir);
    render_kl_histogram(kl, clean, out_dir);
}

}  // namespace ncl

#endif  // NCL_METRICS_HPP
