#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqc/error.hpp"

// Grid-then-refine maximizer for the two-window-length capacity problems
//
//     max  a f1(g1) + (1 - a) f2(g2)
//     s.t. a (g1 + 1/k1) + (1 - a)(g2 + 1/k2) = budget,
//          0 <= a <= 1,  0 <= g1, g2 <= gamma_max,
//
// where f1, f2 are per-slot information functions of a single window length.

namespace cqc {

/// Piecewise-linear table of a function on a uniform grid over [0, hi].
class TabulatedFunction {
public:
    TabulatedFunction() = default;

    template <class F>
    TabulatedFunction(F&& fn, double hi, std::size_t intervals) : hi_(hi), values_(intervals + 1) {
        for (std::size_t i = 0; i <= intervals; ++i) {
            values_[i] = fn(hi * static_cast<double>(i) / static_cast<double>(intervals));
        }
    }

    /// values[i] is the function at hi * i / (values.size() - 1).
    TabulatedFunction(double hi, std::vector<double> values) : hi_(hi), values_(std::move(values)) {
        if (values_.size() < 2 || !(hi_ > 0.0)) {
            throw Error(Errc::domain, "table needs two nodes and a positive range");
        }
    }

    double operator()(double x) const noexcept {
        const double n = static_cast<double>(values_.size() - 1);
        const double pos = std::clamp(x / hi_, 0.0, 1.0) * n;
        const auto i = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
        const double t = pos - static_cast<double>(i);
        return values_[i] + t * (values_[i + 1] - values_[i]);
    }

private:
    double hi_ = 1.0;
    std::vector<double> values_;
};

struct SegmentProblem {
    double budget;
    int k1;
    int k2;
    double gamma_max;
};

struct SegmentSlice {
    std::optional<double> alpha;
    std::optional<double> gamma1;
    std::optional<double> gamma2;
};

struct SegmentSearchOptions {
    double grid_step = 1e-3;
    double tolerance = 1e-12;
    int max_refine_iterations = 4000;
};

struct SegmentOptimum {
    double value;
    double alpha;
    double gamma1;
    double gamma2;
    double constraint_residual;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SegmentPoint {
    double alpha;
    double gamma1;
    double gamma2;
    bool feasible;
};

inline double constraint_lhs(const SegmentProblem& pb, double a, double g1, double g2) noexcept {
    return a * (g1 + 1.0 / pb.k1) + (1.0 - a) * (g2 + 1.0 / pb.k2);
}

inline bool in_box(const SegmentProblem& pb, double g) noexcept {
    constexpr double slack = 1e-12;
    return g >= -slack && g <= pb.gamma_max + slack;
}

/// Which coordinates the search moves; the remaining one is eliminated
/// through the constraint.
enum class Parametrization { alpha_gamma1, gamma1_given_alpha, alpha_given_gamma1, alpha_given_gamma2 };

inline SegmentPoint resolve(const SegmentProblem& pb, Parametrization mode, const SegmentSlice& slice,
                            std::span<const double> free) noexcept {
    const double inv1 = 1.0 / pb.k1;
    const double inv2 = 1.0 / pb.k2;
    double a = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    bool eliminate_g2 = true;
    switch (mode) {
    case Parametrization::alpha_gamma1:
        a = free[0];
        g1 = free[1];
        break;
    case Parametrization::gamma1_given_alpha:
        a = *slice.alpha;
        g1 = free[0];
        break;
    case Parametrization::alpha_given_gamma1:
        a = free[0];
        g1 = *slice.gamma1;
        break;
    case Parametrization::alpha_given_gamma2:
        a = free[0];
        g2 = *slice.gamma2;
        eliminate_g2 = false;
        break;
    }
    if (!(a >= 0.0 && a <= 1.0)) {
        return {a, g1, g2, false};
    }
    if (eliminate_g2) {
        if (!in_box(pb, g1)) {
            return {a, g1, g2, false};
        }
        if (a >= 1.0) {
            // Whole block uses the first window length; g2 is irrelevant.
            const bool ok = std::abs(g1 + inv1 - pb.budget) <= 1e-12;
            return {1.0, g1, 0.0, ok};
        }
        g2 = (pb.budget - a * (g1 + inv1)) / (1.0 - a) - inv2;
        const bool ok = in_box(pb, g2);
        return {a, g1, std::clamp(g2, 0.0, pb.gamma_max), ok};
    }
    if (!in_box(pb, g2)) {
        return {a, g1, g2, false};
    }
    if (a <= 0.0) {
        const bool ok = std::abs(g2 + inv2 - pb.budget) <= 1e-12;
        return {0.0, 0.0, g2, ok};
    }
    g1 = (pb.budget - (1.0 - a) * (g2 + inv2)) / a - inv1;
    const bool ok = in_box(pb, g1);
    return {a, std::clamp(g1, 0.0, pb.gamma_max), g2, ok};
}

template <class F1, class F2>
double evaluate(const SegmentPoint& pt, F1& f1, F2& f2) {
    if (!pt.feasible) {
        return kNegInf;
    }
    double v = 0.0;
    if (pt.alpha > 0.0) {
        v += pt.alpha * f1(pt.gamma1);
    }
    if (pt.alpha < 1.0) {
        v += (1.0 - pt.alpha) * f2(pt.gamma2);
    }
    return v;
}

/// Nelder-Mead on up to two coordinates. Infeasible points score -inf.
template <std::size_t Dim, class G>
std::pair<std::array<double, Dim>, double> nelder_mead(G&& objective, std::array<double, Dim> start,
                                                       double initial_step, double tolerance,
                                                       int max_iterations) {
    using Point = std::array<double, Dim>;
    std::array<Point, Dim + 1> simplex{};
    std::array<double, Dim + 1> score{};
    simplex[0] = start;
    for (std::size_t d = 0; d < Dim; ++d) {
        simplex[d + 1] = start;
        simplex[d + 1][d] += initial_step;
    }
    for (std::size_t i = 0; i <= Dim; ++i) {
        score[i] = objective(simplex[i]);
    }
    auto affine = [](const Point& base, const Point& dir, double t) {
        Point out{};
        for (std::size_t d = 0; d < Dim; ++d) {
            out[d] = base[d] + t * (dir[d] - base[d]);
        }
        return out;
    };
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::array<std::size_t, Dim + 1> order{};
        for (std::size_t i = 0; i <= Dim; ++i) {
            order[i] = i;
        }
        // Maximizing: best first.
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[Dim];
        const std::size_t second_worst = order[Dim - 1];

        double extent = 0.0;
        for (std::size_t i = 0; i <= Dim; ++i) {
            for (std::size_t d = 0; d < Dim; ++d) {
                extent = std::max(extent, std::abs(simplex[i][d] - simplex[best][d]));
            }
        }
        if (std::isfinite(score[worst]) && score[best] - score[worst] <= tolerance && extent < 1e-8) {
            break;
        }
        if (extent < 1e-14) {
            break;
        }

        Point centroid{};
        for (std::size_t i = 0; i <= Dim; ++i) {
            if (i == worst) {
                continue;
            }
            for (std::size_t d = 0; d < Dim; ++d) {
                centroid[d] += simplex[i][d] / static_cast<double>(Dim);
            }
        }
        const Point reflected = affine(centroid, simplex[worst], -1.0);
        const double fr = objective(reflected);
        if (fr > score[best]) {
            const Point expanded = affine(centroid, simplex[worst], -2.0);
            const double fe = objective(expanded);
            if (fe > fr) {
                simplex[worst] = expanded;
                score[worst] = fe;
            } else {
                simplex[worst] = reflected;
                score[worst] = fr;
            }
            continue;
        }
        if (fr > score[second_worst]) {
            simplex[worst] = reflected;
            score[worst] = fr;
            continue;
        }
        const Point contracted = fr > score[worst] ? affine(centroid, reflected, 0.5)
                                                   : affine(centroid, simplex[worst], 0.5);
        const double fc = objective(contracted);
        if (fc > std::max(fr, score[worst])) {
            simplex[worst] = contracted;
            score[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= Dim; ++i) {
            if (i == best) {
                continue;
            }
            simplex[i] = affine(simplex[best], simplex[i], 0.5);
            score[i] = objective(simplex[i]);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= Dim; ++i) {
        if (score[i] > score[best]) {
            best = i;
        }
    }
    return {simplex[best], score[best]};
}

inline std::vector<double> grid_points(double hi, double step) {
    std::vector<double> pts;
    const auto n = static_cast<std::size_t>(std::llround(hi / step));
    pts.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        pts.push_back(std::min(hi, static_cast<double>(i) * step));
    }
    return pts;
}

}  // namespace detail

/// Maximizes over the constraint surface. `coarse1/coarse2` score the grid
/// phase (they may be cheap approximations); `exact1/exact2` score the
/// refinement and the reported value. Grid ties go to the lexicographically
/// smallest (alpha, gamma1).
template <class Exact1, class Exact2, class Coarse1, class Coarse2>
SegmentOptimum maximize_two_segment(const SegmentProblem& pb, Exact1&& exact1, Exact2&& exact2, Coarse1&& coarse1,
                                    Coarse2&& coarse2, const SegmentSlice& slice = {},
                                    const SegmentSearchOptions& opts = {}) {
    using detail::Parametrization;
    if (pb.k1 < 1 || pb.k2 < 1 || !(pb.gamma_max > 0.0)) {
        throw Error(Errc::domain, "segment problem needs positive window lengths and box");
    }
    auto check_box = [&](const std::optional<double>& v, double hi, const char* name) {
        if (v && !(*v >= 0.0 && *v <= hi)) {
            throw Error(Errc::box_violation, std::string(name) + " outside its box");
        }
    };
    check_box(slice.alpha, 1.0, "alpha");
    check_box(slice.gamma1, pb.gamma_max, "gamma1");
    check_box(slice.gamma2, pb.gamma_max, "gamma2");

    auto finish = [&](const detail::SegmentPoint& pt) {
        const double v = detail::evaluate(pt, exact1, exact2);
        if (!std::isfinite(v)) {
            throw Error(Errc::infeasible, "no feasible operating point on this slice");
        }
        const double residual = std::abs(detail::constraint_lhs(pb, pt.alpha, pt.gamma1, pt.gamma2) - pb.budget);
        return SegmentOptimum{v, pt.alpha, pt.gamma1, pt.gamma2, residual};
    };

    const int fixed = int(slice.alpha.has_value()) + int(slice.gamma1.has_value()) + int(slice.gamma2.has_value());
    if (fixed >= 2) {
        // The constraint pins the remaining coordinate.
        const double inv1 = 1.0 / pb.k1;
        const double inv2 = 1.0 / pb.k2;
        detail::SegmentPoint pt{};
        if (fixed == 3) {
            pt = {*slice.alpha, *slice.gamma1, *slice.gamma2, true};
            const double lhs = detail::constraint_lhs(pb, pt.alpha, pt.gamma1, pt.gamma2);
            pt.feasible = std::abs(lhs - pb.budget) <= 1e-9;
        } else if (!slice.alpha) {
            const double c1 = *slice.gamma1 + inv1;
            const double c2 = *slice.gamma2 + inv2;
            if (std::abs(c1 - c2) < 1e-15) {
                pt = {0.0, *slice.gamma1, *slice.gamma2, std::abs(c2 - pb.budget) <= 1e-12};
            } else {
                const double a = (pb.budget - c2) / (c1 - c2);
                pt = {std::clamp(a, 0.0, 1.0), *slice.gamma1, *slice.gamma2, a >= -1e-12 && a <= 1.0 + 1e-12};
            }
        } else {
            const Parametrization mode =
                slice.gamma1 ? Parametrization::alpha_given_gamma1 : Parametrization::alpha_given_gamma2;
            const double a[1] = {*slice.alpha};
            pt = detail::resolve(pb, mode, slice, a);
        }
        return finish(pt);
    }

    Parametrization mode = Parametrization::alpha_gamma1;
    if (slice.alpha) {
        mode = Parametrization::gamma1_given_alpha;
    } else if (slice.gamma1) {
        mode = Parametrization::alpha_given_gamma1;
    } else if (slice.gamma2) {
        mode = Parametrization::alpha_given_gamma2;
    }

    const auto alphas = detail::grid_points(1.0, opts.grid_step);
    const auto gammas = detail::grid_points(pb.gamma_max, opts.grid_step);

    double best_value = detail::kNegInf;
    std::array<double, 2> best_free{0.0, 0.0};
    if (mode == Parametrization::alpha_gamma1) {
        for (double a : alphas) {
            for (double g : gammas) {
                const double fr[2] = {a, g};
                const auto pt = detail::resolve(pb, mode, slice, fr);
                const double v = detail::evaluate(pt, coarse1, coarse2);
                if (v > best_value) {
                    best_value = v;
                    best_free = {a, g};
                }
            }
            // alpha = 1 pins gamma1, which the grid generally misses.
            if (a >= 1.0) {
                const double g1 = pb.budget - 1.0 / pb.k1;
                const double fr[2] = {1.0, g1};
                const auto pt = detail::resolve(pb, mode, slice, fr);
                const double v = detail::evaluate(pt, coarse1, coarse2);
                if (v > best_value) {
                    best_value = v;
                    best_free = {1.0, g1};
                }
            }
        }
    } else {
        const auto& axis = mode == Parametrization::gamma1_given_alpha ? gammas : alphas;
        for (double x : axis) {
            const double fr[1] = {x};
            const double v = detail::evaluate(detail::resolve(pb, mode, slice, fr), coarse1, coarse2);
            if (v > best_value) {
                best_value = v;
                best_free[0] = x;
            }
        }
    }
    if (!std::isfinite(best_value)) {
        throw Error(Errc::infeasible, "no feasible grid point");
    }

    auto clamp_free = [&](std::array<double, 2> fr) {
        if (mode == Parametrization::alpha_gamma1) {
            fr[0] = std::clamp(fr[0], 0.0, 1.0);
            fr[1] = std::clamp(fr[1], 0.0, pb.gamma_max);
        } else if (mode == Parametrization::gamma1_given_alpha) {
            fr[0] = std::clamp(fr[0], 0.0, pb.gamma_max);
        } else {
            fr[0] = std::clamp(fr[0], 0.0, 1.0);
        }
        return fr;
    };
    auto exact_at = [&](std::array<double, 2> fr) {
        fr = clamp_free(fr);
        return detail::evaluate(detail::resolve(pb, mode, slice, fr), exact1, exact2);
    };

    std::array<double, 2> refined = best_free;
    double refined_value = exact_at(best_free);
    const double step = opts.grid_step;
    if (mode == Parametrization::alpha_gamma1) {
        auto [pt, v] = detail::nelder_mead<2>([&](const std::array<double, 2>& x) { return exact_at(x); },
                                              best_free, step, opts.tolerance, opts.max_refine_iterations);
        if (v > refined_value) {
            refined = pt;
            refined_value = v;
        }
    } else {
        auto [pt, v] = detail::nelder_mead<1>(
            [&](const std::array<double, 1>& x) { return exact_at({x[0], 0.0}); }, std::array<double, 1>{best_free[0]},
            step, opts.tolerance, opts.max_refine_iterations);
        if (v > refined_value) {
            refined = {pt[0], 0.0};
            refined_value = v;
        }
    }
    refined = clamp_free(refined);
    return finish(detail::resolve(pb, mode, slice, refined));
}

}  // namespace cqc
