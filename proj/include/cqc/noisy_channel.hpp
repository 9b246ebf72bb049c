#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cqc/error.hpp"
#include "cqc/pmf.hpp"
#include "cqc/tilt.hpp"

// Shifted-binomial channel seen by the decoder when a Bernoulli(r_p)
// background user shares the queue: over a probe window of tau slots,
// Y = X + B with B ~ Bin(tau, r_p) independent of the encoder count X.

namespace cqc {

struct ChannelMatrix {
    int tau;
    double r_p;
    std::vector<Pmf> rows;  // rows[x] is the law of Y on {0..2 tau} given X = x

    double operator()(int x, int y) const noexcept {
        if (x < 0 || x > tau || y < 0 || y > 2 * tau) {
            return 0.0;
        }
        return rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
    }
};

inline void check_background_rate(double r_p) {
    if (!(r_p >= 0.0 && r_p <= 1.0)) {
        throw Error(Errc::domain, "background rate outside [0, 1]");
    }
}

inline ChannelMatrix channel_matrix(int tau, double r_p) {
    if (tau < 1) {
        throw Error(Errc::domain, "window length must be positive");
    }
    check_background_rate(r_p);
    const Pmf noise = binomial_pmf(tau, r_p);
    ChannelMatrix m{tau, r_p, {}};
    m.rows.reserve(static_cast<std::size_t>(tau) + 1);
    for (int x = 0; x <= tau; ++x) {
        std::vector<double> row(static_cast<std::size_t>(2 * tau) + 1, 0.0);
        for (int i = 0; i <= tau; ++i) {
            row[static_cast<std::size_t>(x + i)] = noise[static_cast<std::size_t>(i)];
        }
        m.rows.emplace_back(std::move(row));
    }
    return m;
}

/// Mean of the decoder's count for input law `input` on {0..tau}.
inline double output_mean_check(const Pmf& input, int tau, double r_p) {
    if (input.k() != tau) {
        throw Error(Errc::support_mismatch, "input law must live on {0..tau}");
    }
    check_background_rate(r_p);
    return convolve(input, binomial_pmf(tau, r_p)).mean();
}

struct NoisyEntropyOptions {
    int starts = 3;
    double mu_final = 1e-13;
    int max_newton_per_stage = 60;
};

/// max H(X + Bin(k, r_p)) over laws of X on {0..k} with mean k gamma.
struct NoisyEntropyResult {
    double bits;
    Pmf argmax;
    double kkt_residual;  // bits; stationarity on the support, sign on the rest
    int newton_steps;
};

struct ITildeValue {
    double gamma;
    int k;
    double r_p;
    double bits_per_slot;
    Pmf maximizing_input;
};

namespace detail {

/// Entropy of the noisy output and its derivatives, all in nats.
class OutputEntropy {
public:
    OutputEntropy(int k, double r_p) : k_(k), noise_(binomial_pmf(k, r_p)) {}

    int k() const noexcept { return k_; }

    std::vector<double> output(const std::vector<double>& p) const {
        std::vector<double> q(static_cast<std::size_t>(2 * k_) + 1, 0.0);
        for (int x = 0; x <= k_; ++x) {
            for (int j = 0; j <= k_; ++j) {
                q[static_cast<std::size_t>(x + j)] += p[static_cast<std::size_t>(x)] * noise_[static_cast<std::size_t>(j)];
            }
        }
        return q;
    }

    double value(const std::vector<double>& p) const {
        double h = 0.0;
        for (double qy : output(p)) {
            if (qy > 0.0) {
                h -= qy * std::log(qy);
            }
        }
        return h;
    }

    /// d/dp_x of -sum q log q.
    Eigen::VectorXd gradient(const std::vector<double>& q) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(k_ + 1);
        for (int x = 0; x <= k_; ++x) {
            double acc = 0.0;
            for (int j = 0; j <= k_; ++j) {
                const double w = noise_[static_cast<std::size_t>(j)];
                const double qy = q[static_cast<std::size_t>(x + j)];
                if (w > 0.0 && qy > 0.0) {
                    acc -= w * (std::log(qy) + 1.0);
                }
            }
            g[x] = acc;
        }
        return g;
    }

    Eigen::MatrixXd hessian(const std::vector<double>& q) const {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k_ + 1, k_ + 1);
        for (int y = 0; y <= 2 * k_; ++y) {
            const double qy = q[static_cast<std::size_t>(y)];
            if (!(qy > 0.0)) {
                continue;
            }
            const int lo = std::max(0, y - k_);
            const int hi = std::min(k_, y);
            for (int a = lo; a <= hi; ++a) {
                const double wa = noise_[static_cast<std::size_t>(y - a)];
                for (int b = lo; b <= hi; ++b) {
                    h(a, b) -= wa * noise_[static_cast<std::size_t>(y - b)] / qy;
                }
            }
        }
        return h;
    }

private:
    int k_;
    Pmf noise_;
};

/// Solves [H B^T; B 0][d; w] = [rhs; 0] for the primal block d.
inline Eigen::VectorXd kkt_step(const Eigen::MatrixXd& h, const Eigen::MatrixXd& b, const Eigen::VectorXd& rhs) {
    const auto n = h.rows();
    const auto m = b.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = h;
    kkt.topRightCorner(n, m) = b.transpose();
    kkt.bottomLeftCorner(m, n) = b;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n + m);
    full.head(n) = rhs;
    return kkt.fullPivLu().solve(full).head(n);
}

/// Log-barrier path following for max F(p) + mu sum log p on the slice
/// {p > 0, sum p = 1, sum x p_x = mean}, in variables scaled by p.
inline int barrier_ascent(const OutputEntropy& f, std::vector<double>& p, const NoisyEntropyOptions& opts) {
    const int n = f.k() + 1;
    int steps = 0;
    auto phi = [&](const std::vector<double>& v, double mu) {
        double s = f.value(v);
        for (double pi : v) {
            s += mu * std::log(pi);
        }
        return s;
    };
    for (double mu = 1e-2;; mu *= 0.1) {
        mu = std::max(mu, opts.mu_final);
        for (int it = 0; it < opts.max_newton_per_stage; ++it) {
            const auto q = f.output(p);
            const Eigen::VectorXd g = f.gradient(q);
            const Eigen::MatrixXd hf = f.hessian(q);
            Eigen::VectorXd gs(n);
            Eigen::MatrixXd hs(n, n);
            Eigen::MatrixXd b(2, n);
            for (int i = 0; i < n; ++i) {
                gs[i] = p[static_cast<std::size_t>(i)] * g[i] + mu;
                b(0, i) = p[static_cast<std::size_t>(i)];
                b(1, i) = i * p[static_cast<std::size_t>(i)];
                for (int j = 0; j < n; ++j) {
                    hs(i, j) = p[static_cast<std::size_t>(i)] * hf(i, j) * p[static_cast<std::size_t>(j)];
                }
                hs(i, i) -= mu;
            }
            const Eigen::VectorXd d = kkt_step(hs, b, -gs);
            const double decrement = -d.dot(hs * d);
            if (!(decrement > 1e-18)) {
                break;
            }
            double t = 1.0;
            for (int i = 0; i < n; ++i) {
                if (d[i] < 0.0) {
                    t = std::min(t, -0.99 / d[i]);
                }
            }
            const double base = phi(p, mu);
            std::vector<double> trial(p.size());
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls) {
                for (int i = 0; i < n; ++i) {
                    trial[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] * (1.0 + t * d[i]);
                }
                if (phi(trial, mu) >= base + 0.25 * t * decrement) {
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            ++steps;
            if (!moved) {
                break;
            }
            p.swap(trial);
        }
        if (mu <= opts.mu_final) {
            break;
        }
    }
    return steps;
}

/// Stationarity residual in bits: |g - nu - lambda x| on the support and
/// the positive part of (g - nu - lambda x) off it.
inline double kkt_residual(const OutputEntropy& f, const std::vector<double>& p, double support_floor) {
    const int n = f.k() + 1;
    const Eigen::VectorXd g = f.gradient(f.output(p)) * kLog2E;
    std::vector<int> free;
    for (int i = 0; i < n; ++i) {
        if (p[static_cast<std::size_t>(i)] > support_floor) {
            free.push_back(i);
        }
    }
    double nu = 0.0;
    double lambda = 0.0;
    if (free.size() == 1) {
        nu = g[free[0]];
    } else if (free.size() >= 2) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(free.size()), 2);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(free.size()));
        for (std::size_t r = 0; r < free.size(); ++r) {
            a(static_cast<Eigen::Index>(r), 0) = 1.0;
            a(static_cast<Eigen::Index>(r), 1) = free[r];
            rhs[static_cast<Eigen::Index>(r)] = g[free[r]];
        }
        const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(rhs);
        nu = coef[0];
        lambda = coef[1];
    }
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double slack = g[i] - nu - lambda * i;
        const bool on_support = p[static_cast<std::size_t>(i)] > support_floor;
        worst = std::max(worst, on_support ? std::abs(slack) : std::max(0.0, slack));
    }
    return worst;
}

/// Drops near-zero coordinates and runs plain equality-constrained Newton on
/// the remaining support. Returns false if the support guess does not hold.
inline bool polish_on_support(const OutputEntropy& f, std::vector<double>& p, double mean) {
    constexpr double drop_below = 1e-8;
    const int n = f.k() + 1;
    std::vector<int> free;
    std::vector<double> cand(p.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        if (p[static_cast<std::size_t>(i)] > drop_below) {
            free.push_back(i);
            cand[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)];
        }
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    if (m < 2) {
        return false;
    }
    Eigen::MatrixXd b(2, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        b(0, r) = 1.0;
        b(1, r) = free[static_cast<std::size_t>(r)];
    }
    // Minimum-norm correction back onto both equality constraints.
    Eigen::Vector2d violation;
    violation[0] = 1.0;
    violation[1] = mean;
    for (Eigen::Index r = 0; r < m; ++r) {
        violation[0] -= cand[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])];
        violation[1] -= free[static_cast<std::size_t>(r)] * cand[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])];
    }
    const Eigen::VectorXd fix = b.transpose() * (b * b.transpose()).ldlt().solve(violation);
    for (Eigen::Index r = 0; r < m; ++r) {
        cand[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])] += fix[r];
    }
    for (int it = 0; it < 30; ++it) {
        const auto q = f.output(cand);
        const Eigen::VectorXd g = f.gradient(q);
        const Eigen::MatrixXd h = f.hessian(q);
        Eigen::VectorXd gf(m);
        Eigen::MatrixXd hf(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            gf[r] = g[free[static_cast<std::size_t>(r)]];
            for (Eigen::Index c = 0; c < m; ++c) {
                hf(r, c) = h(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(c)]);
            }
        }
        const Eigen::VectorXd d = kkt_step(hf, b, -gf);
        const double decrement = -d.dot(hf * d);
        double t = 1.0;
        for (Eigen::Index r = 0; r < m; ++r) {
            const double pi = cand[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])];
            if (d[r] < 0.0) {
                t = std::min(t, -0.99 * pi / d[r]);
            }
        }
        for (Eigen::Index r = 0; r < m; ++r) {
            cand[static_cast<std::size_t>(free[static_cast<std::size_t>(r)])] += t * d[r];
        }
        if (!(decrement > 1e-26) || t < 1.0) {
            if (t < 1.0 && decrement > 1e-20) {
                return false;  // support boundary reached: guess was wrong
            }
            break;
        }
    }
    for (double v : cand) {
        if (v < 0.0) {
            return false;
        }
    }
    p.swap(cand);
    return true;
}

inline std::vector<double> strictly_feasible_start(int k, double mean, int which) {
    const auto n = static_cast<std::size_t>(k) + 1;
    const Pmf tilt = solve_tilt(k, mean).pmf;
    std::vector<double> p(n);
    switch (which) {
    case 0:
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = tilt[i];
        }
        break;
    case 1: {
        // Uniform mixed with the nearer endpoint mass.
        const bool low = mean <= 0.5 * k;
        const double t = low ? 2.0 * mean / k : 2.0 * (k - mean) / k;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = t / static_cast<double>(n);
        }
        p[low ? 0 : n - 1] += 1.0 - t;
        break;
    }
    default: {
        // Two-point endpoint law with a thin tilted floor.
        constexpr double eps = 1e-3;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = eps * tilt[i];
        }
        p[0] += (1.0 - eps) * (1.0 - mean / k);
        p[n - 1] += (1.0 - eps) * (mean / k);
        break;
    }
    }
    return p;
}

}  // namespace detail

inline NoisyEntropyResult h_check(double gamma, int k, double r_p, const NoisyEntropyOptions& opts = {}) {
    if (k < 1) {
        throw Error(Errc::domain, "h_check needs k >= 1");
    }
    check_background_rate(r_p);
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw Error(Errc::infeasible, "mean k*gamma outside [0, k]");
    }
    const double mean = k * gamma;
    const Pmf noise = binomial_pmf(k, r_p);
    if (gamma == 0.0 || gamma == 1.0) {
        return {entropy(noise), Pmf::point_mass(k, gamma == 0.0 ? 0 : k), 0.0, 0};
    }
    const detail::OutputEntropy f(k, r_p);
    if (k == 1) {
        std::vector<double> p{1.0 - mean, mean};
        const double bits = f.value(p) * kLog2E;
        return {bits, Pmf(std::move(p)), 0.0, 0};
    }
    double best_bits = -1.0;
    std::vector<double> best;
    int steps = 0;
    const int starts = std::clamp(opts.starts, 1, 3);
    for (int s = 0; s < starts; ++s) {
        auto p = detail::strictly_feasible_start(k, mean, s);
        steps += detail::barrier_ascent(f, p, opts);
        auto polished = p;
        if (detail::polish_on_support(f, polished, mean) &&
            detail::kkt_residual(f, polished, 1e-8) <= detail::kkt_residual(f, p, 1e-8)) {
            p.swap(polished);
        }
        const double bits = f.value(p) * kLog2E;
        if (bits > best_bits) {
            best_bits = bits;
            best = std::move(p);
        }
    }
    for (double& v : best) {
        v = std::max(v, 0.0);
    }
    Pmf argmax = Pmf::from_weights(best);
    const double residual = detail::kkt_residual(f, best, 1e-8);
    return {best_bits, std::move(argmax), residual, steps};
}

/// Per-slot mutual information: (1/k)[max H(Y) - H(Bin(k, r_p))].
inline ITildeValue i_tilde(double gamma, int k, double r_p, const NoisyEntropyOptions& opts = {}) {
    NoisyEntropyResult h = h_check(gamma, k, r_p, opts);
    const double noise_bits = entropy(binomial_pmf(k, r_p));
    const double bits = std::max(0.0, (h.bits - noise_bits) / k);
    return ITildeValue{gamma, k, r_p, bits, std::move(h.argmax)};
}

}  // namespace cqc
