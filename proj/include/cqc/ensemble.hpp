#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "cqc/codec.hpp"
#include "cqc/error.hpp"
#include "cqc/parallel.hpp"
#include "cqc/pmf.hpp"
#include "cqc/rng.hpp"

// Average ML error of the i.i.d. random codebook ensemble for codebook sizes
// far beyond what can be listed. Each trial draws the sent codeword, runs it
// through the simulated queue, then computes exactly the probability that an
// independent codeword scores above or level with it under the ML metric.
// The metric of a window depends only on its length and on the background
// count d = y - x, so a segment's score is a function of how many windows
// fall in each d class; a dynamic program over those class counts gives the
// competitor score law without enumerating codewords.

namespace cqc {

struct EnsembleReport {
    int n;
    double log2_messages;
    std::size_t trials;
    double mean_error;
    double std_error;
    double rate_bits_per_slot;
    std::int64_t max_backlog;
    std::uint64_t seed;
};

struct EnsembleOptions {
    std::size_t max_cells = 50'000'000;
    double tie_tolerance = 1e-9;
};

namespace detail {

struct ScoreLaw {
    std::vector<double> values;  // ascending
    std::vector<double> probs;
};

/// Competitor score law for one segment of equal-length windows.
class SegmentScorer {
public:
    SegmentScorer(int length, const Pmf& law, double r_p, std::size_t windows, std::size_t max_cells)
        : length_(length), law_(law), windows_(windows) {
        const Pmf noise = binomial_pmf(length, r_p);
        for (int d = 0; d <= length; ++d) {
            if (noise[static_cast<std::size_t>(d)] > 0.0) {
                classes_.push_back(d);
                log_noise_.push_back(std::log(noise[static_cast<std::size_t>(d)]));
            }
        }
        dims_ = classes_.size() - 1;
        std::size_t cells = 1;
        strides_.assign(dims_, 0);
        for (std::size_t j = 0; j < dims_; ++j) {
            strides_[j] = cells;
            if (cells > max_cells / (windows_ + 1)) {
                throw Error(Errc::domain, "class-count table exceeds the cell budget");
            }
            cells *= windows_ + 1;
        }
        cur_.assign(cells, 0.0);
        next_.assign(cells, 0.0);
    }

    /// Score of a class-count vector; the last class absorbs the remainder.
    double value(std::span<const std::size_t> counts) const noexcept {
        double v = 0.0;
        std::size_t used = 0;
        for (std::size_t j = 0; j < dims_; ++j) {
            v += static_cast<double>(counts[j]) * log_noise_[j];
            used += counts[j];
        }
        return v + static_cast<double>(windows_ - used) * log_noise_[dims_];
    }

    /// Score of the sent codeword given its per-window background counts.
    double sent_value(std::span<const int> background) const {
        std::vector<std::size_t> counts(dims_, 0);
        for (int d : background) {
            const auto it = std::find(classes_.begin(), classes_.end(), d);
            if (it == classes_.end()) {
                throw Error(Errc::domain, "background count has zero probability");
            }
            const auto j = static_cast<std::size_t>(it - classes_.begin());
            if (j < dims_) {
                ++counts[j];
            }
        }
        return value(counts);
    }

    ScoreLaw law(std::span<const int> y) {
        std::fill(cur_.begin(), cur_.end(), 0.0);
        cur_[0] = 1.0;
        std::vector<double> step(classes_.size());
        for (std::size_t w = 0; w < y.size(); ++w) {
            for (std::size_t c = 0; c < classes_.size(); ++c) {
                const int x = y[w] - classes_[c];
                step[c] = x >= 0 && x <= length_ ? law_[static_cast<std::size_t>(x)] : 0.0;
            }
            for_each_state(w + 1, [&](std::size_t idx, std::span<const std::size_t>) { next_[idx] = 0.0; });
            for_each_state(w, [&](std::size_t idx, std::span<const std::size_t>) {
                const double p = cur_[idx];
                if (p == 0.0) {
                    return;
                }
                for (std::size_t c = 0; c < dims_; ++c) {
                    if (step[c] > 0.0) {
                        next_[idx + strides_[c]] += p * step[c];
                    }
                }
                if (step[dims_] > 0.0) {
                    next_[idx] += p * step[dims_];
                }
            });
            cur_.swap(next_);
        }
        std::vector<std::pair<double, double>> pairs;
        for_each_state(y.size(), [&](std::size_t idx, std::span<const std::size_t> counts) {
            if (cur_[idx] > 0.0) {
                pairs.emplace_back(value(counts), cur_[idx]);
            }
        });
        std::sort(pairs.begin(), pairs.end());
        ScoreLaw out;
        out.values.reserve(pairs.size());
        out.probs.reserve(pairs.size());
        for (const auto& [v, p] : pairs) {
            out.values.push_back(v);
            out.probs.push_back(p);
        }
        return out;
    }

private:
    /// Visits every class-count vector with total at most `total`.
    template <class Fn>
    void for_each_state(std::size_t total, Fn&& fn) const {
        std::vector<std::size_t> counts(dims_, 0);
        if (dims_ == 0) {
            fn(0, counts);
            return;
        }
        auto rec = [&](auto&& self, std::size_t j, std::size_t left, std::size_t idx) -> void {
            for (std::size_t c = 0; c <= left; ++c) {
                counts[j] = c;
                const std::size_t at = idx + c * strides_[j];
                if (j + 1 == dims_) {
                    fn(at, std::span<const std::size_t>(counts));
                } else {
                    self(self, j + 1, left - c, at);
                }
            }
            counts[j] = 0;
        };
        rec(rec, 0, total, 0);
    }

    int length_;
    const Pmf& law_;
    std::size_t windows_;
    std::vector<int> classes_;
    std::vector<double> log_noise_;
    std::size_t dims_ = 0;
    std::vector<std::size_t> strides_;
    std::vector<double> cur_;
    std::vector<double> next_;
};

/// P(competitor > sent) and P(competitor == sent) for independent segments.
inline std::pair<double, double> compare_scores(const ScoreLaw& a, const ScoreLaw& b, double sent, double tol) {
    std::vector<double> tail(b.probs.size() + 1, 0.0);  // tail[i] = sum of b.probs[i..]
    for (std::size_t i = b.probs.size(); i-- > 0;) {
        tail[i] = tail[i + 1] + b.probs[i];
    }
    double greater = 0.0;
    double equal = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double need = sent - a.values[i];
        const auto lo = std::lower_bound(b.values.begin(), b.values.end(), need - tol) - b.values.begin();
        const auto hi = std::upper_bound(b.values.begin(), b.values.end(), need + tol) - b.values.begin();
        greater += a.probs[i] * tail[static_cast<std::size_t>(hi)];
        equal += a.probs[i] * (tail[static_cast<std::size_t>(lo)] - tail[static_cast<std::size_t>(hi)]);
    }
    return {greater, equal};
}

/// Probability the sent message wins among M i.i.d. codewords with the
/// lowest index winning ties, for a uniformly placed sent index.
inline double ensemble_correct_probability(double p_greater, double p_equal, double log2_messages) {
    if (log2_messages <= 0.0) {
        return 1.0;
    }
    const double m = std::exp2(log2_messages);
    const double b = 1.0 - p_greater;
    if (!(b > 0.0)) {
        return 0.0;
    }
    double log_correct = (m - 1.0) * std::log1p(-p_greater);
    if (p_equal > 0.0) {
        const double log_rho = std::log1p(-std::min(1.0, p_equal / b));
        if (!std::isfinite(log_rho)) {
            return std::exp(log_correct - std::log(m));  // only the lowest index can win a certain tie
        }
        log_correct += std::log(-std::expm1(m * log_rho)) - std::log(m) - std::log(-std::expm1(log_rho));
    }
    return std::exp(log_correct);
}

}  // namespace detail

inline EnsembleReport estimate_ensemble_error(const OperatingPoint& op, int n, double log2_messages,
                                              std::size_t trials, std::uint64_t seed,
                                              const EnsembleOptions& opts = {}) {
    if (!op.r_p) {
        throw Error(Errc::domain, "the ensemble estimator needs a background rate");
    }
    if (trials < 1 || !(log2_messages >= 0.0)) {
        throw Error(Errc::domain, "need trials >= 1 and log2 M >= 0");
    }
    const double r_p = *op.r_p;
    const int alpha_slots = split_alpha_slots(n, op.alpha, op.tau_star);
    const auto lengths = window_lengths(n, alpha_slots, op.tau_star);
    const std::size_t w1 = static_cast<std::size_t>(alpha_slots / op.tau_star);
    const std::size_t w2 = lengths.size() - w1;
    const auto probes = detail::closed_probe_stream({n, alpha_slots, op.tau_star});
    const ChannelConfig channel{r_p};
    std::vector<double> errors(trials, 0.0);
    std::vector<std::int64_t> backlogs(trials, 0);
    const CounterRng root(seed);
    parallel_for(trials, [&](std::size_t i) {
        CounterRng rng = root.split(i);
        const auto codeword = sample_codeword(op, lengths, rng);
        const std::int64_t backlog =
            std::max<std::int64_t>(op.tau_star + 1, required_backlog(detail::padded(codeword), probes));
        backlogs[i] = backlog;
        const auto obs = detail::run_block(probes, codeword, channel, backlog, rng);
        const auto x = stream_counts(codeword, lengths);
        std::vector<int> y(obs.size());
        std::vector<int> d(obs.size());
        for (std::size_t w = 0; w < obs.size(); ++w) {
            y[w] = obs[w].y;
            d[w] = obs[w].y - x[w];
        }
        const std::span<const int> y_all(y);
        const std::span<const int> d_all(d);
        detail::ScoreLaw law1{{0.0}, {1.0}};
        detail::ScoreLaw law2{{0.0}, {1.0}};
        double sent = 0.0;
        if (w1 > 0) {
            detail::SegmentScorer s1(op.tau_star, op.p1, r_p, w1, opts.max_cells);
            law1 = s1.law(y_all.first(w1));
            sent += s1.sent_value(d_all.first(w1));
        }
        if (w2 > 0) {
            detail::SegmentScorer s2(op.tau_star + 1, op.p2, r_p, w2, opts.max_cells);
            law2 = s2.law(y_all.subspan(w1));
            sent += s2.sent_value(d_all.subspan(w1));
        }
        const double tol = opts.tie_tolerance * std::max(1.0, std::abs(sent));
        const auto [greater, equal] = detail::compare_scores(law1, law2, sent, tol);
        errors[i] = 1.0 - detail::ensemble_correct_probability(greater, equal, log2_messages);
    });
    const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(trials);
    double ss = 0.0;
    for (double e : errors) {
        ss += (e - mean) * (e - mean);
    }
    const double se = trials > 1 ? std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials)) : 0.0;
    return EnsembleReport{n,
                          log2_messages,
                          trials,
                          mean,
                          se,
                          log2_messages / n,
                          *std::max_element(backlogs.begin(), backlogs.end()),
                          seed};
}

}  // namespace cqc
