#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/noisy_channel.hpp"
#include "cqc/parallel.hpp"
#include "cqc/pmf.hpp"
#include "cqc/rng.hpp"
#include "cqc/two_segment.hpp"

namespace cqc {

inline constexpr int kDefaultTauMax = 8;

/// Optimum of one probe spacing pair (tau, tau + 1).
struct TauCandidate {
    int tau;
    bool feasible;
    double value;
    double alpha;
    double gamma1;
    double gamma2;
};

struct CapacityResult3 {
    double r_p;
    double capacity_bits_per_slot;
    double alpha;
    double gamma1;
    double gamma2;
    int tau_star;
    double constraint_residual;
    Pmf input1;  // encoder count law on tau* windows
    Pmf input2;  // encoder count law on tau*+1 windows
    std::vector<TauCandidate> per_tau;
};

struct Capacity3Options {
    int tau_max = kDefaultTauMax;
    double tolerance = 1e-12;
    double table_step = 1e-3;
    // A larger tau must beat the incumbent by this much; tau and tau+1 share
    // the all-(tau+1) operating point, so exact ties are common.
    double tau_tie_margin = 1e-9;
    SegmentSlice slice{};
};

namespace detail {

inline TabulatedFunction tabulate_i_tilde(int k, double r_p, double step) {
    const auto intervals = static_cast<std::size_t>(std::llround(1.0 / step));
    std::vector<double> values(intervals + 1);
    parallel_for(values.size(), [&](std::size_t i) {
        values[i] = i_tilde(static_cast<double>(i) / static_cast<double>(intervals), k, r_p).bits_per_slot;
    });
    return TabulatedFunction(1.0, std::move(values));
}

inline bool tau_feasible(int tau, double r_p) noexcept { return 1.0 / (tau + 1) <= 1.0 - r_p + 1e-15; }

}  // namespace detail

inline CapacityResult3 solve_capacity_3user(double r_p, const Capacity3Options& opts = {}) {
    if (!(r_p >= 0.0 && r_p < 1.0)) {
        throw Error(Errc::domain, "background rate must lie in [0, 1)");
    }
    if (opts.tau_max < 2) {
        throw Error(Errc::domain, "tau_max must be at least 2");
    }
    if (!(opts.tolerance > 0.0) || !(opts.table_step > 0.0 && opts.table_step <= 0.1)) {
        throw Error(Errc::domain, "tolerance and table step must be positive");
    }
    std::map<int, TabulatedFunction> tables;
    auto table = [&](int k) -> const TabulatedFunction& {
        auto it = tables.find(k);
        if (it == tables.end()) {
            it = tables.emplace(k, detail::tabulate_i_tilde(k, r_p, opts.table_step)).first;
        }
        return it->second;
    };

    std::vector<TauCandidate> audit;
    std::optional<TauCandidate> best;
    double best_residual = 0.0;
    std::optional<double> previous;
    SegmentSearchOptions search;
    search.grid_step = opts.table_step;
    search.tolerance = opts.tolerance;
    for (int tau = 1; tau <= opts.tau_max - 1; ++tau) {
        if (!detail::tau_feasible(tau, r_p)) {
            audit.push_back({tau, false, 0.0, 0.0, 0.0, 0.0});
            continue;
        }
        const SegmentProblem problem{1.0 - r_p, tau, tau + 1, 1.0};
        auto exact1 = [&](double g) { return i_tilde(g, tau, r_p).bits_per_slot; };
        auto exact2 = [&](double g) { return i_tilde(g, tau + 1, r_p).bits_per_slot; };
        SegmentOptimum opt{};
        try {
            opt = maximize_two_segment(problem, exact1, exact2, table(tau), table(tau + 1), opts.slice, search);
        } catch (const Error& e) {
            if (e.code() != Errc::infeasible) {
                throw;
            }
            audit.push_back({tau, false, 0.0, 0.0, 0.0, 0.0});
            continue;
        }
        const TauCandidate cand{tau, true, opt.value, opt.alpha, opt.gamma1, opt.gamma2};
        audit.push_back(cand);
        if (!best || cand.value > best->value + opts.tau_tie_margin) {
            best = cand;
            best_residual = opt.constraint_residual;
        }
        if (previous && cand.value < *previous) {
            break;
        }
        previous = cand.value;
    }
    if (!best) {
        throw Error(Errc::infeasible, "no probe spacing up to tau_max - 1 meets the rate budget");
    }
    Pmf input1 = i_tilde(best->gamma1, best->tau, r_p).maximizing_input;
    Pmf input2 = i_tilde(best->gamma2, best->tau + 1, r_p).maximizing_input;
    return CapacityResult3{r_p,
                           best->value,
                           best->alpha,
                           best->gamma1,
                           best->gamma2,
                           best->tau,
                           best_residual,
                           std::move(input1),
                           std::move(input2),
                           std::move(audit)};
}

inline CapacityResult3 solve_capacity_3user(double r_p, int tau_max) {
    Capacity3Options opts;
    opts.tau_max = tau_max;
    return solve_capacity_3user(r_p, opts);
}

/// Entropy-correction term H(Bin(k-1)) + H(Bin(k+1)) - 2 H(Bin(k)).
inline double binomial_entropy_correction(int k, double r_p) {
    return entropy(binomial_pmf(k - 1, r_p)) + entropy(binomial_pmf(k + 1, r_p)) - 2.0 * entropy(binomial_pmf(k, r_p));
}

/// 2 H(g2, k) - H(g1, k-1) - H(g3, k+1) + f(k, r_p) with the noisy maximum
/// entropies H and g2 = a g1 + (1 - a) g3, a = (k-1)/(2k).
inline double i_concavity_margin(int k, double gamma1, double gamma3, double r_p) {
    if (k < 2) {
        throw Error(Errc::domain, "concavity margin needs k >= 2");
    }
    const double a = (k - 1.0) / (2.0 * k);
    const double gamma2 = std::clamp(a * gamma1 + (1.0 - a) * gamma3, 0.0, 1.0);
    return 2.0 * h_check(gamma2, k, r_p).bits - h_check(gamma1, k - 1, r_p).bits - h_check(gamma3, k + 1, r_p).bits +
           binomial_entropy_correction(k, r_p);
}

struct ConcavityReport {
    double worst_margin;
    int worst_k;
    double worst_gamma1;
    double worst_gamma3;
    double worst_r_p;
    std::size_t evaluated;
    double tolerance;
    bool passed;
};

struct IConcavityOptions {
    double r_p_step = 0.05;
    double tolerance = 1e-6;
};

/// Samples (gamma1, gamma3) uniformly for every 2 <= k <= tau_max - 1; the
/// background rate cycles through the grid {0, step, ..., 1} so each grid
/// value gets an equal share of every k's samples.
inline ConcavityReport validate_i_concavity(int tau_max, std::size_t samples, std::uint64_t seed,
                                            const IConcavityOptions& opts = {}) {
    if (tau_max < 3) {
        throw Error(Errc::domain, "tau_max must be at least 3");
    }
    if (!(opts.r_p_step > 0.0 && opts.r_p_step <= 1.0)) {
        throw Error(Errc::domain, "r_p grid step must lie in (0, 1]");
    }
    const auto grid_n = static_cast<std::size_t>(std::llround(1.0 / opts.r_p_step)) + 1;
    std::vector<double> grid(grid_n);
    for (std::size_t i = 0; i < grid_n; ++i) {
        grid[i] = std::min(1.0, static_cast<double>(i) * opts.r_p_step);
    }
    struct Sample {
        int k;
        double g1;
        double g3;
        double r_p;
        double margin;
    };
    std::vector<Sample> work;
    const CounterRng root(seed);
    for (int k = 2; k <= tau_max - 1; ++k) {
        CounterRng rng = root.split(static_cast<std::uint64_t>(k));
        for (std::size_t s = 0; s < samples; ++s) {
            const double g1 = uniform01(rng);
            const double g3 = uniform01(rng);
            work.push_back({k, g1, g3, grid[s % grid_n], 0.0});
        }
    }
    parallel_for(work.size(), [&](std::size_t i) {
        auto& w = work[i];
        w.margin = i_concavity_margin(w.k, w.g1, w.g3, w.r_p);
    });
    ConcavityReport report{std::numeric_limits<double>::infinity(), 0, 0.0, 0.0, 0.0, work.size(), opts.tolerance, true};
    for (const auto& w : work) {
        if (w.margin < report.worst_margin) {
            report.worst_margin = w.margin;
            report.worst_k = w.k;
            report.worst_gamma1 = w.g1;
            report.worst_gamma3 = w.g3;
            report.worst_r_p = w.r_p;
        }
    }
    report.passed = work.empty() || report.worst_margin >= -opts.tolerance;
    return report;
}

}  // namespace cqc
