#pragma once

#include <cmath>
#include <optional>

#include "cqc/error.hpp"
#include "cqc/tilt.hpp"
#include "cqc/two_segment.hpp"

namespace cqc {

/// Two-user channel: probe inter-arrivals of one and two slots, encoder rate
/// per slot bounded by one half in either window, unit service rate.
struct CapacityResult2 {
    double capacity_bits_per_slot;
    double alpha;
    double gamma1;
    double gamma2;
    double constraint_residual;
};

inline double objective_2user(double alpha, double gamma1, double gamma2) {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(gamma1 >= 0.0 && gamma1 <= 0.5) || !(gamma2 >= 0.0 && gamma2 <= 0.5)) {
        throw Error(Errc::box_violation, "objective_2user parameters outside [0,1]x[0,1/2]x[0,1/2]");
    }
    return alpha * h_tilde(gamma1, 1).bits_per_slot + (1.0 - alpha) * h_tilde(gamma2, 2).bits_per_slot;
}

struct Capacity2Options {
    double tolerance = 1e-12;
    SegmentSlice slice{};
};

inline CapacityResult2 solve_capacity_2user(const Capacity2Options& opts = {}) {
    if (!(opts.tolerance > 0.0)) {
        throw Error(Errc::domain, "tolerance must be positive");
    }
    const SegmentProblem problem{1.0, 1, 2, 0.5};
    auto exact1 = [](double g) { return h_tilde(g, 1).bits_per_slot; };
    auto exact2 = [](double g) { return h_tilde(g, 2).bits_per_slot; };
    // The grid phase reads from tables at ten times the grid resolution.
    const TabulatedFunction coarse1(exact1, 0.5, 5000);
    const TabulatedFunction coarse2(exact2, 0.5, 5000);
    SegmentSearchOptions search;
    search.tolerance = opts.tolerance;
    const SegmentOptimum best = maximize_two_segment(problem, exact1, exact2, coarse1, coarse2, opts.slice, search);
    return CapacityResult2{best.value, best.alpha, best.gamma1, best.gamma2, best.constraint_residual};
}

inline CapacityResult2 solve_capacity_2user(double tolerance) {
    Capacity2Options opts;
    opts.tolerance = tolerance;
    return solve_capacity_2user(opts);
}

}  // namespace cqc
