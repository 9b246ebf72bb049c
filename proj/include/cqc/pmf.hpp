#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqc/error.hpp"

namespace cqc {

inline constexpr double kLog2E = 1.4426950408889634074;
inline constexpr double kPmfSumTolerance = 1e-12;

/// Probability mass function on the support {0, 1, ..., k}.
class Pmf {
public:
    /// Validating constructor: entries must be nonnegative and sum to one.
    explicit Pmf(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) {
            throw Error(Errc::domain, "pmf needs at least one support point");
        }
        double total = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw Error(Errc::domain, "pmf entries must be finite and nonnegative");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > kPmfSumTolerance) {
            throw Error(Errc::domain, "pmf entries sum to " + std::to_string(total));
        }
    }

    /// Normalizes nonnegative weights; at least one must be positive.
    static Pmf from_weights(std::vector<double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw Error(Errc::domain, "weights must be finite and nonnegative");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            throw Error(Errc::domain, "weights sum to zero");
        }
        for (double& w : weights) {
            w /= total;
        }
        return Pmf(std::move(weights));
    }

    static Pmf point_mass(int k, int at) {
        if (k < 0 || at < 0 || at > k) {
            throw Error(Errc::domain, "point mass outside support");
        }
        std::vector<double> probs(static_cast<std::size_t>(k) + 1, 0.0);
        probs[static_cast<std::size_t>(at)] = 1.0;
        return Pmf(std::move(probs));
    }

    static Pmf uniform(int k) {
        if (k < 0) {
            throw Error(Errc::domain, "negative support size");
        }
        return Pmf(std::vector<double>(static_cast<std::size_t>(k) + 1, 1.0 / (k + 1)));
    }

    int k() const noexcept { return static_cast<int>(probs_.size()) - 1; }
    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t i) const noexcept { return probs_[i]; }
    std::span<const double> probs() const noexcept { return probs_; }

    double mean() const noexcept {
        double m = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            m += static_cast<double>(i) * probs_[i];
        }
        return m;
    }

    friend bool operator==(const Pmf&, const Pmf&) = default;

private:
    std::vector<double> probs_;
};

/// Shannon entropy in bits with 0 log 0 = 0.
inline double entropy_bits(std::span<const double> probs) noexcept {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) {
            h -= p * std::log2(p);
        }
    }
    return h;
}

inline double entropy(const Pmf& pmf) noexcept { return entropy_bits(pmf.probs()); }

/// D(p || q) in bits.
inline double kl_divergence(const Pmf& p, const Pmf& q) {
    if (p.k() != q.k()) {
        throw Error(Errc::support_mismatch, "kl_divergence needs equal supports");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) {
            continue;
        }
        if (q[i] <= 0.0) {
            throw Error(Errc::absolute_continuity,
                        "q vanishes at " + std::to_string(i) + " where p does not");
        }
        d += p[i] * std::log2(p[i] / q[i]);
    }
    return d < 0.0 ? 0.0 : d;
}

/// log C(k, i) via lgamma.
inline double log_binomial_coefficient(int k, int i) noexcept {
    return std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(k - i + 1.0);
}

/// Bin(k, p); exact point masses at p = 0 and p = 1.
inline Pmf binomial_pmf(int k, double p) {
    if (k < 0) {
        throw Error(Errc::domain, "binomial size must be nonnegative");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(Errc::domain, "binomial parameter outside [0, 1]");
    }
    if (p == 0.0) {
        return Pmf::point_mass(k, 0);
    }
    if (p == 1.0) {
        return Pmf::point_mass(k, k);
    }
    std::vector<double> probs(static_cast<std::size_t>(k) + 1);
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    for (int i = 0; i <= k; ++i) {
        probs[static_cast<std::size_t>(i)] =
            std::exp(log_binomial_coefficient(k, i) + i * lp + (k - i) * lq);
    }
    return Pmf::from_weights(std::move(probs));
}

/// Law of X + Z for independent X ~ a, Z ~ b.
inline Pmf convolve(const Pmf& a, const Pmf& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return Pmf::from_weights(std::move(out));
}

/// Half the L1 distance; shorter supports are zero-padded.
inline double total_variation(const Pmf& a, const Pmf& b) noexcept {
    const std::size_t n = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pa = i < a.size() ? a[i] : 0.0;
        const double pb = i < b.size() ? b[i] : 0.0;
        acc += std::abs(pa - pb);
    }
    return 0.5 * acc;
}

}  // namespace cqc
