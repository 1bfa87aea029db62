#ifndef NCL_LOSSES_HPP
#define NCL_LOSSES_HPP

// Per-sample loss terms of the two-view objective:
//
//   total = (1 - lambda) * (hard(x) + soft(x) + hard(t(x)) + soft(t(x))) + lambda * symKL(p_x, p_t(x))
//
// All terms are per sample; batch means are taken only when aggregating the
// selected subset. Every log clamps its argument at kProbClamp.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ncl/error.hpp"
#include "ncl/nn.hpp"

namespace ncl {

inline constexpr double kProbClamp = 1e-12;

inline double clamped_log(double p) { return std::log(std::max(p, kProbClamp)); }

inline double hard_ce(const ProbDist& p, std::size_t y) {
    if (y >= p.size()) throw InvalidInput("label " + std::to_string(y) + " out of range");
    return -clamped_log(p[y]);
}

/// Cross-entropy of the student against a (constant) teacher distribution.
inline double soft_ce(const ProbDist& student, const ProbDist& teacher) {
    if (student.size() != teacher.size()) throw InvalidInput("distribution sizes differ");
    double s = 0.0;
    for (std::size_t j = 0; j < student.size(); ++j) s -= teacher[j] * clamped_log(student[j]);
    return s;
}

inline double entropy(const ProbDist& p) { return soft_ce(p, p); }

inline double kl_divergence(const ProbDist& p, const ProbDist& q) {
    if (p.size() != q.size()) throw InvalidInput("distribution sizes differ");
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * (clamped_log(p[j]) - clamped_log(q[j]));
    return s;
}

/// D(p||q) + D(q||p).
inline double sym_kl(const ProbDist& p, const ProbDist& q) {
    if (p.size() != q.size()) throw InvalidInput("distribution sizes differ");
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += (p[j] - q[j]) * (clamped_log(p[j]) - clamped_log(q[j]));
    return s;
}

/// The five loss components of one sample.
struct LossTerms {
    double hard_x = 0.0;
    double hard_xt = 0.0;
    double soft_x = 0.0;
    double soft_xt = 0.0;
    double kl = 0.0;
};

inline double combine(const LossTerms& t, double lambda) {
    return (1.0 - lambda) * (t.hard_x + t.soft_x + t.hard_xt + t.soft_xt) + lambda * t.kl;
}

struct PerSampleLosses {
    std::vector<double> hard_x, hard_xt, soft_x, soft_xt, kl, total;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return total.size(); }
};

inline void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
}

/// Assemble the weighted total for every sample.
inline PerSampleLosses total_loss(std::span<const LossTerms> parts, double lambda) {
    check_lambda(lambda);
    PerSampleLosses out;
    if (lambda == 1.0) out.warnings.push_back("lambda = 1 drops every classification term; only the KL term trains");
    for (const auto& t : parts) {
        out.hard_x.push_back(t.hard_x);
        out.hard_xt.push_back(t.hard_xt);
        out.soft_x.push_back(t.soft_x);
        out.soft_xt.push_back(t.soft_xt);
        out.kl.push_back(t.kl);
        out.total.push_back(combine(t, lambda));
    }
    return out;
}

/// Which terms are active.
struct LossWeights {
    double lambda = 0.5;
    bool use_soft = true;  // teacher pseudo-label terms
};

/// Student outputs for both views plus the teacher targets (nullptr when soft terms are off).
struct SampleOutputs {
    const ProbDist* student_x = nullptr;
    const ProbDist* student_xt = nullptr;
    const ProbDist* teacher_x = nullptr;
    const ProbDist* teacher_xt = nullptr;
    std::size_t label = 0;
};

inline LossTerms sample_terms(const SampleOutputs& s, const LossWeights& w) {
    LossTerms t;
    t.hard_x = hard_ce(*s.student_x, s.label);
    t.hard_xt = hard_ce(*s.student_xt, s.label);
    if (w.use_soft) {
        t.soft_x = soft_ce(*s.student_x, *s.teacher_x);
        t.soft_xt = soft_ce(*s.student_xt, *s.teacher_xt);
    }
    t.kl = sym_kl(*s.student_x, *s.student_xt);
    return t;
}

/// Gradients of the per-sample total w.r.t. both student logit vectors.
/// Teacher outputs are constant targets and receive nothing.
struct LogitGradients {
    std::vector<double> x;
    std::vector<double> xt;
};

inline LogitGradients loss_gradients(const SampleOutputs& s, const LossWeights& w) {
    check_lambda(w.lambda);
    const ProbDist& p = *s.student_x;
    const ProbDist& q = *s.student_xt;
    const std::size_t C = p.size();
    if (q.size() != C) throw InvalidInput("distribution sizes differ");
    if (s.label >= C) throw InvalidInput("label out of range");
    std::vector<double> dp(C, 0.0), dq(C, 0.0);
    const double cls = 1.0 - w.lambda;
    for (std::size_t j = 0; j < C; ++j) {
        const bool p_live = p[j] > kProbClamp;
        const bool q_live = q[j] > kProbClamp;
        double tp = j == s.label ? 1.0 : 0.0;
        double tq = tp;
        if (w.use_soft) {
            tp += (*s.teacher_x)[j];
            tq += (*s.teacher_xt)[j];
        }
        if (p_live) dp[j] -= cls * tp / p[j];
        if (q_live) dq[j] -= cls * tq / q[j];
        if (w.lambda != 0.0) {
            const double log_ratio = clamped_log(p[j]) - clamped_log(q[j]);
            dp[j] += w.lambda * (log_ratio + (p_live ? 1.0 - q[j] / p[j] : 0.0));
            dq[j] += w.lambda * (-log_ratio + (q_live ? 1.0 - p[j] / q[j] : 0.0));
        }
    }
    return {softmax_backward(p, dp), softmax_backward(q, dq)};
}

/// Gradient of plain cross-entropy w.r.t. the logits.
inline std::vector<double> cross_entropy_logit_gradient(const ProbDist& p, std::size_t y) {
    std::vector<double> g = p.probs;
    g.at(y) -= 1.0;
    return g;
}

}  // namespace ncl

#endif  // NCL_LOSSES_HPP
