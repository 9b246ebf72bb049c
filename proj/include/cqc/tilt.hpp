#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/pmf.hpp"

// Maximum-entropy machinery for counts on {0, ..., k} with a prescribed mean.
// The maximizer is the exponential tilt of the uniform law U_k, and the
// optimal value is log2(k+1) minus the Legendre-Fenchel rate function of U_k.

namespace cqc {

inline constexpr double kTiltBracket = 60.0;
inline constexpr double kTiltMeanTolerance = 1e-12;

struct TiltSolution {
    double lambda;
    Pmf pmf;
    double target_mean;
    double residual;
};

struct HTildeValue {
    double gamma;
    int k;
    double bits_per_slot;
};

/// P(i) proportional to exp(i * lambda), normalized after subtracting the
/// largest exponent.
inline Pmf tilted_pmf(int k, double lambda) {
    if (k < 1) {
        throw Error(Errc::domain, "tilted_pmf needs k >= 1");
    }
    if (!std::isfinite(lambda)) {
        throw Error(Errc::domain, "tilt parameter must be finite");
    }
    const double top = lambda > 0.0 ? k * lambda : 0.0;
    std::vector<double> w(static_cast<std::size_t>(k) + 1);
    for (int i = 0; i <= k; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(i * lambda - top);
    }
    return Pmf::from_weights(std::move(w));
}

/// Log-moment generating function of U_k, psi(lambda) = ln E[exp(lambda U_k)].
inline double log_mgf_uniform(int k, double lambda) noexcept {
    const double top = lambda > 0.0 ? k * lambda : 0.0;
    double acc = 0.0;
    for (int i = 0; i <= k; ++i) {
        acc += std::exp(i * lambda - top);
    }
    return top + std::log(acc) - std::log(k + 1.0);
}

/// Inverts the strictly increasing map lambda -> mean(tilted_pmf(k, lambda))
/// by bisection on [-60, 60].
inline TiltSolution solve_tilt(int k, double target_mean) {
    if (k < 1) {
        throw Error(Errc::domain, "solve_tilt needs k >= 1");
    }
    if (!(target_mean > 0.0 && target_mean < k)) {
        throw Error(Errc::endpoint, "tilt target mean must lie strictly inside (0, k)");
    }
    double lo = -kTiltBracket;
    double hi = kTiltBracket;
    double lambda = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        lambda = 0.5 * (lo + hi);
        const double m = tilted_pmf(k, lambda).mean();
        if (std::abs(m - target_mean) < kTiltMeanTolerance || hi - lo < 1e-15) {
            break;
        }
        if (m < target_mean) {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    Pmf pmf = tilted_pmf(k, lambda);
    const double residual = std::abs(pmf.mean() - target_mean);
    return TiltSolution{lambda, std::move(pmf), target_mean, residual};
}

/// psi*(x) = sup_lambda {lambda x - psi(lambda)} for U_k, in nats.
inline double rate_function(int k, double x) {
    if (k < 1) {
        throw Error(Errc::domain, "rate_function needs k >= 1");
    }
    if (!(x >= 0.0 && x <= k)) {
        throw Error(Errc::domain, "rate_function argument outside [0, k]");
    }
    const double ceiling = std::log(k + 1.0);
    if (x == 0.0 || x == k) {
        return ceiling;
    }
    const double lambda = solve_tilt(k, x).lambda;
    return std::clamp(lambda * x - log_mgf_uniform(k, lambda), 0.0, ceiling);
}

/// Per-slot maximum entropy of a count on {0..k} with mean k*gamma, through
/// the rate function: (1/k)[log2(k+1) - psi*(k gamma) log2 e].
inline HTildeValue h_tilde(double gamma, int k) {
    if (k < 1) {
        throw Error(Errc::domain, "h_tilde needs k >= 1");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw Error(Errc::domain, "h_tilde gamma outside [0, 1]");
    }
    if (gamma == 0.0 || gamma == 1.0) {
        return HTildeValue{gamma, k, 0.0};
    }
    const double bits = (std::log2(k + 1.0) - rate_function(k, k * gamma) * kLog2E) / k;
    return HTildeValue{gamma, k, std::max(bits, 0.0)};
}

/// Same quantity, taken as the entropy of the tilted maximizer itself.
inline double h_tilde_by_entropy(double gamma, int k) {
    if (k < 1) {
        throw Error(Errc::domain, "h_tilde needs k >= 1");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw Error(Errc::domain, "h_tilde gamma outside [0, 1]");
    }
    if (gamma == 0.0 || gamma == 1.0) {
        return 0.0;
    }
    return entropy(solve_tilt(k, k * gamma).pmf) / k;
}

/// The entropy-maximizing law itself, point masses at the endpoints.
inline Pmf max_entropy_pmf(double gamma, int k) {
    if (gamma <= 0.0) {
        return Pmf::point_mass(k, 0);
    }
    if (gamma >= 1.0) {
        return Pmf::point_mass(k, k);
    }
    return solve_tilt(k, k * gamma).pmf;
}

}  // namespace cqc
