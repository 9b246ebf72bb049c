#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cqc/capacity3.hpp"
#include "cqc/noisy_channel.hpp"
#include "cqc/parallel.hpp"
#include "cqc/pmf.hpp"
#include "cqc/rng.hpp"
#include "cqc/tilt.hpp"

// Randomized and grid property sweeps. Each returns the worst signed margin
// (negative means the property is violated by that much) and where it occurred.

namespace cqc {

struct CheckResult {
    std::string name;
    double worst_margin;
    double tolerance;
    std::size_t evaluated;
    std::string where;
    bool passed;
};

namespace detail {

class MarginTracker {
public:
    explicit MarginTracker(std::string name, double tolerance) : name_(std::move(name)), tol_(tolerance) {}

    template <class Where>
    void add(double margin, Where&& where) {
        ++count_;
        if (margin < worst_) {
            worst_ = margin;
            where_ = where();
        }
    }

    CheckResult result() const {
        const double worst = count_ ? worst_ : 0.0;
        return {name_, worst, tol_, count_, where_, worst >= -tol_};
    }

private:
    std::string name_;
    double tol_;
    double worst_ = std::numeric_limits<double>::infinity();
    std::size_t count_ = 0;
    std::string where_;
};

template <class... Ts>
std::string describe(const Ts&... parts) {
    std::ostringstream os;
    os.precision(10);
    ((os << parts), ...);
    return os.str();
}

}  // namespace detail

/// Rate-function and direct-entropy evaluations of H-tilde agree.
inline CheckResult check_dual_formula(int k_max = 8, double step = 0.01, double tolerance = 1e-9) {
    detail::MarginTracker t("htilde dual formula", tolerance);
    const auto steps = static_cast<int>(std::llround(1.0 / step));
    for (int k = 1; k <= k_max; ++k) {
        for (int i = 1; i < steps; ++i) {
            const double g = i * step;
            const double diff = std::abs(h_tilde(g, k).bits_per_slot - h_tilde_by_entropy(g, k));
            t.add(-diff, [&] { return detail::describe("k=", k, " gamma=", g); });
        }
    }
    return t.result();
}

inline CheckResult check_symmetry(std::size_t samples, std::uint64_t seed, double tolerance = 1e-10) {
    detail::MarginTracker t("htilde symmetry", tolerance);
    CounterRng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        const int k = 1 + static_cast<int>(uniform_index(rng, 8));
        const double g = uniform01(rng);
        const double diff = std::abs(h_tilde(g, k).bits_per_slot - h_tilde(1.0 - g, k).bits_per_slot);
        t.add(-diff, [&] { return detail::describe("k=", k, " gamma=", g); });
    }
    return t.result();
}

/// Joint concavity in (gamma, 1/k): combine (g1, 1/k1) and (g3, 1/k3) with the
/// weight that lands on an integer k2 between them.
inline CheckResult check_pair_concavity(std::size_t samples, std::uint64_t seed, double tolerance = 1e-9) {
    detail::MarginTracker t("htilde pair concavity", tolerance);
    CounterRng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        int k1 = 1 + static_cast<int>(uniform_index(rng, 8));
        int k3 = 1 + static_cast<int>(uniform_index(rng, 8));
        if (k1 > k3) {
            std::swap(k1, k3);
        }
        const double g1 = uniform01(rng);
        const double g3 = uniform01(rng);
        int k2 = k1;
        double a = uniform01(rng);
        if (k1 != k3) {
            k2 = k1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k3 - k1 + 1)));
            a = (1.0 / k2 - 1.0 / k3) / (1.0 / k1 - 1.0 / k3);
        }
        const double g2 = std::clamp(a * g1 + (1.0 - a) * g3, 0.0, 1.0);
        const double margin = h_tilde(g2, k2).bits_per_slot -
                              (a * h_tilde(g1, k1).bits_per_slot + (1.0 - a) * h_tilde(g3, k3).bits_per_slot);
        t.add(margin, [&] { return detail::describe("k=(", k1, ",", k2, ",", k3, ") gamma1=", g1, " gamma3=", g3); });
    }
    return t.result();
}

/// No law with mean k gamma is closer to uniform than the tilted one.
inline CheckResult check_kl_projection(std::size_t points, std::size_t draws, std::uint64_t seed,
                                       double tolerance = 1e-6) {
    detail::MarginTracker t("kl projection", tolerance);
    CounterRng rng(seed);
    for (std::size_t s = 0; s < points; ++s) {
        const int k = 1 + static_cast<int>(uniform_index(rng, 8));
        const double g = 0.01 + 0.98 * uniform01(rng);
        const double m = k * g;
        const double bound = rate_function(k, m) * kLog2E;
        const Pmf uniform = Pmf::uniform(k);
        const double tilted_gap = std::abs(kl_divergence(solve_tilt(k, m).pmf, uniform) - bound);
        t.add(tolerance - 1e-9 - tilted_gap, [&] { return detail::describe("tilted k=", k, " gamma=", g); });
        for (std::size_t d = 0; d < draws; ++d) {
            std::vector<double> w(static_cast<std::size_t>(k) + 1);
            for (auto& x : w) {
                x = -std::log(1.0 - uniform01(rng));
            }
            Pmf p = Pmf::from_weights(std::move(w));
            // Mix with an endpoint mass to move the mean onto k gamma.
            std::vector<double> q(p.probs().begin(), p.probs().end());
            const double mu = p.mean();
            const double tw = mu > m ? m / mu : (k - m) / (k - mu);
            for (auto& x : q) {
                x *= tw;
            }
            q[mu > m ? 0 : static_cast<std::size_t>(k)] += 1.0 - tw;
            const Pmf feasible = Pmf::from_weights(std::move(q));
            t.add(kl_divergence(feasible, uniform) - bound, [&] { return detail::describe("k=", k, " gamma=", g); });
        }
    }
    return t.result();
}

inline CheckResult check_tilt_monotone(int k_max = 8, double tolerance = 0.0) {
    detail::MarginTracker t("tilt mean monotone", tolerance);
    for (int k = 1; k <= k_max; ++k) {
        double prev = tilted_pmf(k, -20.0).mean();
        for (int i = 1; i <= 400; ++i) {
            const double lambda = -20.0 + 0.1 * i;
            const double m = tilted_pmf(k, lambda).mean();
            t.add(m - prev, [&] { return detail::describe("k=", k, " lambda=", lambda); });
            prev = m;
        }
    }
    return t.result();
}

/// I-tilde equals H-tilde without background traffic.
inline CheckResult check_noiseless_reduction(int k_max = 8, double step = 0.01, double tolerance = 1e-6) {
    detail::MarginTracker t("itilde noiseless reduction", tolerance);
    const auto steps = static_cast<int>(std::llround(1.0 / step));
    for (int k = 1; k <= k_max; ++k) {
        for (int i = 0; i <= steps; ++i) {
            const double g = i * step;
            const double diff = std::abs(i_tilde(g, k, 0.0).bits_per_slot - h_tilde(g, k).bits_per_slot);
            t.add(-diff, [&] { return detail::describe("k=", k, " gamma=", g); });
        }
    }
    return t.result();
}

/// Background traffic never adds information: I-tilde <= H-tilde.
inline CheckResult check_data_processing(std::size_t samples, std::uint64_t seed, int k_max = 8,
                                         double tolerance = 1e-9) {
    detail::MarginTracker t("itilde below htilde", tolerance);
    CounterRng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k_max)));
        const double g = uniform01(rng);
        const double r = uniform01(rng);
        t.add(h_tilde(g, k).bits_per_slot - i_tilde(g, k, r).bits_per_slot,
              [&] { return detail::describe("k=", k, " gamma=", g, " r_p=", r); });
    }
    return t.result();
}

/// alpha I(g1) + (1 - alpha) I(g3) <= I(alpha g1 + (1 - alpha) g3) at fixed k.
inline CheckResult check_itilde_first_argument(std::size_t samples, std::uint64_t seed, int k_max = 8,
                                               double tolerance = 1e-9) {
    detail::MarginTracker t("itilde first-argument concavity", tolerance);
    CounterRng rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k_max)));
        const double r = uniform01(rng);
        const double g1 = uniform01(rng);
        const double g3 = uniform01(rng);
        const double a = uniform01(rng);
        const double g2 = std::clamp(a * g1 + (1.0 - a) * g3, 0.0, 1.0);
        const double margin = i_tilde(g2, k, r).bits_per_slot -
                              (a * i_tilde(g1, k, r).bits_per_slot + (1.0 - a) * i_tilde(g3, k, r).bits_per_slot);
        t.add(margin, [&] { return detail::describe("k=", k, " r_p=", r, " gamma1=", g1, " gamma3=", g3, " a=", a); });
    }
    return t.result();
}

/// I-tilde nonincreasing in r_p over {0, 0.05, ..., 0.5}. Reported only; it fails for k = 1 near r_p = 1/2.
inline CheckResult check_monotone_degradation(int k_max = 8, double gamma_step = 0.05, double tolerance = 1e-6) {
    detail::MarginTracker t("itilde nonincreasing in r_p", tolerance);
    const auto steps = static_cast<int>(std::llround(1.0 / gamma_step));
    for (int k = 1; k <= k_max; ++k) {
        for (int i = 0; i <= steps; ++i) {
            const double g = i * gamma_step;
            double prev = i_tilde(g, k, 0.0).bits_per_slot;
            for (int j = 1; j <= 10; ++j) {
                const double r = 0.05 * j;
                const double v = i_tilde(g, k, r).bits_per_slot;
                t.add(prev - v, [&] { return detail::describe("k=", k, " gamma=", g, " r_p=", r); });
                prev = v;
            }
        }
    }
    return t.result();
}

inline CheckResult check_i_concavity(int tau_max, std::size_t samples, std::uint64_t seed, double tolerance = 1e-6) {
    IConcavityOptions opts;
    opts.tolerance = tolerance;
    const ConcavityReport r = validate_i_concavity(tau_max, samples, seed, opts);
    return {"noisy pair concavity margin",
            r.evaluated ? r.worst_margin : 0.0,
            tolerance,
            r.evaluated,
            detail::describe("k=", r.worst_k, " gamma1=", r.worst_gamma1, " gamma3=", r.worst_gamma3,
                             " r_p=", r.worst_r_p),
            r.passed};
}

}  // namespace cqc
