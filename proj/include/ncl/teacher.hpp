#ifndef NCL_TEACHER_HPP
#define NCL_TEACHER_HPP

#include <string>

#include "ncl/error.hpp"
#include "ncl/nn.hpp"

namespace ncl {

/// Exponential moving average of the student's parameters. Never trained directly.
struct TeacherState {
    ModelState model;
    double momentum = 0.999;

    friend bool operator==(const TeacherState&, const TeacherState&) = default;
};

inline void check_momentum(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("EMA momentum must lie in [0, 1), got " + std::to_string(gamma));
}

/// Teacher starts as a copy of the student.
inline TeacherState init_teacher(const ModelState& student, double momentum = 0.999) {
    check_momentum(momentum);
    return {student, momentum};
}

/// teacher <- gamma * teacher + (1 - gamma) * student, element-wise.
inline void ema_update(TeacherState& teacher, const ModelState& student, double gamma) {
    check_momentum(gamma);
    if (teacher.model.arch != student.arch || !same_structure(teacher.model.params, student.params))
        throw InvalidInput("teacher and student structures differ");
    for_each_pair(teacher.model.params, student.params,
                  [gamma](double& t, double s) { t = gamma * t + (1.0 - gamma) * s; });
}

inline void ema_update(TeacherState& teacher, const ModelState& student) {
    ema_update(teacher, student, teacher.momentum);
}

}  // namespace ncl

#endif  // NCL_TEACHER_HPP
