#ifndef NCL_TRAINER_HPP
#define NCL_TRAINER_HPP

// Training loop for two-view small-loss training with an EMA teacher, and
// the plain cross-entropy baseline.
//
// One epoch:
//   shuffle the training set
//   for each mini-batch:
//     forward x and t(x) through the student (and the teacher)
//     per-sample total loss; keep the ceil(R * B) smallest
//     backpropagate the mean total over the kept samples; Adam step
//   EMA-update the teacher; advance R

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncl/adam.hpp"
#include "ncl/checkpoint.hpp"
#include "ncl/dataset.hpp"
#include "ncl/losses.hpp"
#include "ncl/metrics.hpp"
#include "ncl/nn.hpp"
#include "ncl/rng.hpp"
#include "ncl/selection.hpp"
#include "ncl/teacher.hpp"
#include "ncl/transforms.hpp"

namespace ncl {

enum class Mode { Proposed, Standard, AblationNoKl, AblationNoTeacher };
enum class EmaCadence { Epoch, Iteration };
enum class LrSchedule { Constant, Linear };

inline std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::Proposed: return "proposed";
        case Mode::Standard: return "standard";
        case Mode::AblationNoKl: return "ablation-no-kl";
        case Mode::AblationNoTeacher: return "ablation-no-teacher";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    for (auto m : {Mode::Proposed, Mode::Standard, Mode::AblationNoKl, Mode::AblationNoTeacher})
        if (mode_name(m) == s) return m;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct TrainConfig {
    double lambda = 0.5;
    double gamma = 0.999;
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    std::size_t epochs = 200;
    std::size_t t_k = 10;
    double tau = 0.0;
    TransformKind transform{};
    std::uint64_t seed = 0;
    Mode mode = Mode::Proposed;
    EmaCadence ema_cadence = EmaCadence::Epoch;
    LrSchedule lr_schedule = LrSchedule::Constant;
    bool two_view_eval = false;
    bool record_wall_time = false;

    /// Throws ConfigError on hard violations, returns soft warnings.
    std::vector<std::string> validate() const {
        check_lambda(lambda);
        check_momentum(gamma);
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (batch_size < 2) throw ConfigError("batch size must be at least 2");
        if (epochs == 0) throw ConfigError("epochs must be positive");
        SelectionSchedule{tau, t_k}.validate();
        std::vector<std::string> warnings;
        if (t_k > epochs) warnings.push_back("T_k exceeds the epoch count; R never reaches its plateau");
        if (lambda == 1.0 && mode != Mode::Standard && mode != Mode::AblationNoKl)
            warnings.push_back("lambda = 1 drops every classification term");
        return warnings;
    }
};

/// What a mode switches on.
struct ModeFlags {
    bool two_views = true;
    bool use_teacher = true;
    bool select = true;
    double lambda = 0.5;
};

inline ModeFlags mode_flags(const TrainConfig& cfg) {
    switch (cfg.mode) {
        case Mode::Proposed: return {true, true, true, cfg.lambda};
        case Mode::Standard: return {false, false, false, 0.0};
        case Mode::AblationNoKl: return {true, true, true, 0.0};
        case Mode::AblationNoTeacher: return {true, false, true, cfg.lambda};
    }
    return {};
}

struct RunState {
    std::size_t epoch = 0;  // completed epochs
    ModelState student;
    TeacherState teacher;
    AdamState optimizer;
    SelectionSchedule schedule;
    Rng shuffle_rng;

    double keep_rate() const { return r_of_t(schedule, static_cast<double>(epoch)); }

    friend bool operator==(const RunState&, const RunState&) = default;
};

inline RunState init_run(const TrainConfig& cfg, const Architecture& arch) {
    cfg.validate();
    RunState s;
    s.student = ModelState::he_uniform(arch, cfg.seed);
    s.teacher = init_teacher(s.student, cfg.gamma);
    s.optimizer = AdamState::for_model(s.student, cfg.learning_rate);
    s.schedule = {cfg.tau, cfg.t_k};
    s.shuffle_rng = Rng(cfg.seed, Stream::Shuffle);
    return s;
}

/// Per-sample outputs of one forward over both views.
struct TwoViewPass {
    Trace trace_x;
    Trace trace_xt;
    ProbDist student_x;
    ProbDist student_xt;
    ProbDist teacher_x;
    ProbDist teacher_xt;
    LossTerms terms;
    double total = 0.0;
};

inline TwoViewPass two_view_pass(const RunState& state, const ModeFlags& flags, const TransformKind& transform,
                                 const Shape& sample_shape, std::span<const double> x, std::size_t label) {
    TwoViewPass p;
    std::vector<double> xt;
    apply_into(transform, x, sample_shape, xt);
    p.trace_x = forward_trace(state.student, x);
    p.trace_xt = forward_trace(state.student, xt);
    p.student_x = softmax(p.trace_x.logits());
    p.student_xt = softmax(p.trace_xt.logits());
    if (flags.use_teacher) {
        p.teacher_x = predict(state.teacher.model, x);
        p.teacher_xt = predict(state.teacher.model, xt);
    }
    p.terms = sample_terms({&p.student_x, &p.student_xt, &p.teacher_x, &p.teacher_xt, label},
                           {flags.lambda, flags.use_teacher});
    p.total = combine(p.terms, flags.lambda);
    return p;
}

/// Student gradient of the mean selected total for one mini-batch, plus the
/// selection that produced it. `batch` holds dataset indices.
struct BatchStep {
    ParamSet grads;
    SelectionResult selection;
};

inline BatchStep batch_gradient(const RunState& state, const TrainConfig& cfg, const LabeledDataset& data,
                                std::span<const std::size_t> batch, double keep_rate, long epoch = -1,
                                long batch_index = -1) {
    const ModeFlags flags = mode_flags(cfg);
    const Shape sample_shape = data.sample_shape();
    BatchStep step;
    step.grads = zeros_like(state.student.params);
    std::vector<std::uint8_t> mask;
    for (std::size_t i : batch) mask.push_back(data.clean_mask[i]);

    if (!flags.two_views) {
        std::vector<Trace> traces;
        std::vector<double> losses;
        for (std::size_t i : batch) {
            traces.push_back(forward_trace(state.student, data.sample(i)));
            losses.push_back(hard_ce(softmax(traces.back().logits()), static_cast<std::size_t>(data.noisy_labels[i])));
        }
        try {
            step.selection = select_small_loss(losses, 1.0, mask);
        } catch (const TrainingDiverged& e) {
            throw TrainingDiverged(std::string("training diverged: ") + e.what(), epoch, batch_index,
                                   static_cast<long>(batch[static_cast<std::size_t>(e.sample())]));
        }
        const double w = 1.0 / static_cast<double>(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            auto g = cross_entropy_logit_gradient(softmax(traces[b].logits()),
                                                  static_cast<std::size_t>(data.noisy_labels[batch[b]]));
            for (double& v : g) v *= w;
            backward_trace(state.student, traces[b], g, step.grads);
        }
        return step;
    }

    std::vector<TwoViewPass> passes;
    passes.reserve(batch.size());
    std::vector<double> totals;
    for (std::size_t i : batch) {
        passes.push_back(two_view_pass(state, flags, cfg.transform, sample_shape, data.sample(i),
                                       static_cast<std::size_t>(data.noisy_labels[i])));
        totals.push_back(passes.back().total);
    }
    try {
        step.selection = select_small_loss(totals, flags.select ? keep_rate : 1.0, mask);
    } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), epoch, batch_index,
                               static_cast<long>(batch[static_cast<std::size_t>(e.sample())]));
    }
    std::vector<std::size_t> kept = step.selection.selected;
    std::sort(kept.begin(), kept.end());
    const double w = 1.0 / static_cast<double>(kept.size());
    for (std::size_t b : kept) {
        const auto& p = passes[b];
        auto g = loss_gradients({&p.student_x, &p.student_xt, &p.teacher_x, &p.teacher_xt,
                                 static_cast<std::size_t>(data.noisy_labels[batch[b]])},
                                {flags.lambda, flags.use_teacher});
        for (double& v : g.x) v *= w;
        for (double& v : g.xt) v *= w;
        backward_trace(state.student, p.trace_x, g.x, step.grads);
        backward_trace(state.student, p.trace_xt, g.xt, step.grads);
    }
    return step;
}

struct EpochResult {
    SelectionTally tally;
    double keep_rate = 1.0;
};

/// One pass over `data`. Advances the epoch counter, the teacher and R.
inline EpochResult train_epoch(RunState& state, const LabeledDataset& data, const TrainConfig& cfg) {
    const long epoch = static_cast<long>(state.epoch) + 1;
    EpochResult out;
    out.keep_rate = state.keep_rate();
    if (cfg.lr_schedule == LrSchedule::Linear)
        state.optimizer.lr = cfg.learning_rate * (1.0 - static_cast<double>(state.epoch) / static_cast<double>(cfg.epochs));
    else
        state.optimizer.lr = cfg.learning_rate;

    const auto order = state.shuffle_rng.permutation(data.size());
    long batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::span<const std::size_t> batch(order.data() + start, end - start);
        auto step = batch_gradient(state, cfg, data, batch, out.keep_rate, epoch, batch_index);
        try {
            adam_step(state.student, step.grads, state.optimizer);
        } catch (const TrainingDiverged& e) {
            throw TrainingDiverged(std::string("training diverged: ") + e.what() + " (epoch " +
                                       std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ")",
                                   epoch, batch_index, -1, e.layer());
        }
        out.tally.add(step.selection);
        if (cfg.ema_cadence == EmaCadence::Iteration) ema_update(state.teacher, state.student, cfg.gamma);
    }
    if (cfg.ema_cadence == EmaCadence::Epoch) ema_update(state.teacher, state.student, cfg.gamma);
    ++state.epoch;
    return out;
}

/// Fraction of argmax predictions equal to the clean label. With
/// `two_view` the prediction averages the probabilities of x and t(x).
inline double evaluate(const ModelState& model, const LabeledDataset& test, bool two_view = false,
                       const TransformKind& transform = {}) {
    std::size_t correct = 0;
    std::vector<double> xt;
    for (std::size_t i = 0; i < test.size(); ++i) {
        ProbDist p = predict(model, test.sample(i));
        if (two_view) {
            apply_into(transform, test.sample(i), test.sample_shape(), xt);
            const ProbDist q = predict(model, xt);
            for (std::size_t j = 0; j < p.size(); ++j) p.probs[j] = 0.5 * (p.probs[j] + q[j]);
        }
        if (static_cast<int>(p.argmax()) == test.clean_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

/// Per-sample symmetric KL between the student's outputs on x and t(x),
/// with means over the clean and noisy partitions.
struct KlStats {
    std::vector<double> per_sample;
    WeightedMean clean;
    WeightedMean noisy;
};

inline KlStats consistency_stats(const ModelState& model, const LabeledDataset& data, const TransformKind& transform) {
    KlStats s;
    std::vector<double> xt;
    for (std::size_t i = 0; i < data.size(); ++i) {
        apply_into(transform, data.sample(i), data.sample_shape(), xt);
        const double kl = sym_kl(predict(model, data.sample(i)), predict(model, xt));
        s.per_sample.push_back(kl);
        (data.clean_mask[i] ? s.clean : s.noisy).add(kl);
    }
    return s;
}

/// Train one epoch and measure it.
inline EpochMetrics run_epoch(RunState& state, const LabeledDataset& train, const LabeledDataset& test,
                              const TrainConfig& cfg, KlStats* kl_out = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = train_epoch(state, train, cfg);
    EpochMetrics m;
    m.epoch = state.epoch;
    m.r_of_t = r.keep_rate;
    m.label_precision = r.tally.precision();
    m.mean_total_loss_selected = r.tally.mean_selected_loss();
    m.selected_count = r.tally.selected();
    m.test_accuracy = evaluate(state.student, test, cfg.two_view_eval, cfg.transform);
    auto kl = consistency_stats(state.student, train, cfg.transform);
    m.mean_kl_clean = kl.clean.value();
    m.mean_kl_noisy = kl.noisy.value();
    if (cfg.record_wall_time)
        m.wall_time_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    if (kl_out) *kl_out = std::move(kl);
    return m;
}

// ---------------------------------------------------------------------------
// Run-state snapshots: "NTRS", u16 version, u64 completed epochs, schedule,
// optimizer scalars and moments, shuffle RNG state, then student and teacher
// as embedded NTCK records.

inline constexpr char kRunStateMagic[4] = {'N', 'T', 'R', 'S'};

inline std::vector<std::uint8_t> encode_run_state(const RunState& s) {
    ByteWriter w;
    w.raw(kRunStateMagic, 4);
    w.uint(std::uint16_t{1});
    w.uint(static_cast<std::uint64_t>(s.epoch));
    w.f64(s.schedule.tau);
    w.uint(static_cast<std::uint64_t>(s.schedule.t_k));
    w.uint(s.optimizer.step);
    w.f64(s.optimizer.lr);
    w.f64(s.optimizer.beta1);
    w.f64(s.optimizer.beta2);
    w.f64(s.optimizer.eps);
    for (const auto* set : {&s.optimizer.m, &s.optimizer.v}) {
        w.uint(static_cast<std::uint32_t>(set->size()));
        for (const auto& b : *set) {
            w.doubles(b.weights);
            w.doubles(b.bias);
        }
    }
    w.str(s.shuffle_rng.serialize());
    w.f64(s.teacher.momentum);
    write_model(w, s.student, CheckpointRole::Student);
    write_model(w, s.teacher.model, CheckpointRole::Teacher);
    return w.bytes();
}

inline RunState decode_run_state(const std::vector<std::uint8_t>& bytes, const std::string& source = "run state") {
    ByteReader r(bytes, source);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kRunStateMagic, 4) != 0) throw FileError(source + ": bad run-state magic");
    if (r.uint<std::uint16_t>() != 1) throw FileError(source + ": unsupported run-state version");
    RunState s;
    s.epoch = r.uint<std::uint64_t>();
    s.schedule.tau = r.f64();
    s.schedule.t_k = r.uint<std::uint64_t>();
    s.optimizer.step = r.uint<std::uint64_t>();
    s.optimizer.lr = r.f64();
    s.optimizer.beta1 = r.f64();
    s.optimizer.beta2 = r.f64();
    s.optimizer.eps = r.f64();
    for (auto* set : {&s.optimizer.m, &s.optimizer.v}) {
        set->resize(r.uint<std::uint32_t>());
        for (auto& b : *set) {
            b.weights = r.doubles();
            b.bias = r.doubles();
        }
    }
    s.shuffle_rng.deserialize(r.str());
    s.teacher.momentum = r.f64();
    s.student = read_model(r, source).model;
    s.teacher.model = read_model(r, source).model;
    if (!r.at_end()) throw FileError(source + ": trailing bytes after run state");
    if (!same_structure(s.student.params, s.optimizer.m) || !same_structure(s.student.params, s.teacher.model.params))
        throw FileError(source + ": inconsistent parameter structures");
    return s;
}

}  // namespace ncl

#endif  // NCL_TRAINER_HPP
