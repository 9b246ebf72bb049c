#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cqc/capacity2.hpp"
#include "cqc/capacity3.hpp"
#include "cqc/noisy_channel.hpp"
#include "cqc/properties.hpp"

namespace {

using cqc::Errc;
using cqc::Pmf;

double output_entropy(const std::vector<double>& input, double r_p) {
    const int k = static_cast<int>(input.size()) - 1;
    return cqc::entropy(cqc::convolve(Pmf::from_weights(input), cqc::binomial_pmf(k, r_p)));
}

// Grid search over the mean-constrained slice of the simplex, k <= 3.
double brute_force_h_check(double gamma, int k, double r_p, double step) {
    const double m = k * gamma;
    double best = -1.0;
    if (k == 1) {
        return output_entropy({1.0 - m, m}, r_p);
    }
    if (k == 2) {
        for (double s = 0.0; s <= 1.0 + 1e-12; s += step) {
            const double p2 = (m - s) / 2.0;
            const double p0 = 1.0 - s - p2;
            if (p2 < -1e-15 || p0 < -1e-15) {
                continue;
            }
            best = std::max(best, output_entropy({std::max(p0, 0.0), s, std::max(p2, 0.0)}, r_p));
        }
        return best;
    }
    for (double p1 = 0.0; p1 <= 1.0 + 1e-12; p1 += step) {
        for (double p2 = 0.0; p1 + p2 <= 1.0 + 1e-12; p2 += step) {
            const double p3 = (m - p1 - 2.0 * p2) / 3.0;
            const double p0 = 1.0 - p1 - p2 - p3;
            if (p3 < -1e-15 || p0 < -1e-15) {
                continue;
            }
            best = std::max(best, output_entropy({std::max(p0, 0.0), p1, p2, std::max(p3, 0.0)}, r_p));
        }
    }
    return best;
}

TEST(ChannelMatrix, Examples) {
    const auto m2 = cqc::channel_matrix(2, 0.4);
    ASSERT_EQ(m2.rows.size(), 3u);
    for (const auto& row : m2.rows) {
        EXPECT_EQ(row.k(), 4);
    }
    const auto m3 = cqc::channel_matrix(3, 0.0);
    for (int x = 0; x <= 3; ++x) {
        EXPECT_EQ(m3.rows[static_cast<std::size_t>(x)], Pmf::point_mass(6, x));
    }
    const auto m = cqc::channel_matrix(2, 0.3);
    const double expect[5] = {0.0, 0.49, 0.42, 0.09, 0.0};
    for (int y = 0; y <= 4; ++y) {
        EXPECT_NEAR(m(1, y), expect[y], 1e-12);
    }
}

TEST(ChannelMatrix, RowsAreShiftedBinomials) {
    for (int tau = 1; tau <= 6; ++tau) {
        const auto m = cqc::channel_matrix(tau, 0.27);
        const Pmf b = cqc::binomial_pmf(tau, 0.27);
        for (int x = 0; x <= tau; ++x) {
            double total = 0.0;
            for (int y = 0; y <= 2 * tau; ++y) {
                const double want = (y >= x && y - x <= tau) ? b[static_cast<std::size_t>(y - x)] : 0.0;
                EXPECT_NEAR(m(x, y), want, 1e-15);
                total += m(x, y);
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
    EXPECT_THROW(cqc::channel_matrix(0, 0.1), cqc::Error);
    EXPECT_THROW(cqc::channel_matrix(2, 1.5), cqc::Error);
}

TEST(OutputMeanCheck, Examples) {
    EXPECT_EQ(cqc::output_mean_check(Pmf::point_mass(2, 0), 2, 0.0), 0.0);
    EXPECT_NEAR(cqc::output_mean_check(Pmf::uniform(2), 2, 0.3), 1.6, 1e-12);
    for (int tau = 1; tau <= 5; ++tau) {
        const Pmf p = cqc::solve_tilt(tau, 0.37 * tau).pmf;
        EXPECT_NEAR(cqc::output_mean_check(p, tau, 0.2), tau * (0.37 + 0.2), 1e-10);
    }
    EXPECT_THROW(cqc::output_mean_check(Pmf::uniform(2), 3, 0.1), cqc::Error);
}

TEST(HCheck, Examples) {
    const auto a = cqc::h_check(0.5, 1, 0.5);
    EXPECT_NEAR(a.bits, 1.5, 1e-12);
    EXPECT_NEAR(a.argmax[0], 0.5, 1e-12);
    for (int k = 1; k <= 8; ++k) {
        for (double g : {0.1, 0.35, 0.5, 0.8}) {
            EXPECT_NEAR(cqc::h_check(g, k, 0.0).bits, k * cqc::h_tilde(g, k).bits_per_slot, 1e-8);
        }
    }
    const auto c = cqc::h_check(0.5, 2, 0.2);
    EXPECT_GE(c.bits, output_entropy({1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.2) - 1e-9);
    EXPECT_NEAR(c.bits, brute_force_h_check(0.5, 2, 0.2, 1e-4), 1e-6);
}

TEST(HCheck, InfeasibleMean) {
    for (double g : {-0.01, 1.01}) {
        try {
            cqc::h_check(g, 3, 0.1);
            ADD_FAILURE();
        } catch (const cqc::Error& e) {
            EXPECT_EQ(e.code(), Errc::infeasible);
        }
    }
}

TEST(HCheck, AgreesWithBruteForce) {
    for (double r : {0.05, 0.3, 0.7}) {
        for (double g : {0.05, 0.3, 0.62, 0.97}) {
            EXPECT_NEAR(cqc::h_check(g, 2, r).bits, brute_force_h_check(g, 2, r, 1e-5), 2e-7) << g << ' ' << r;
            const double coarse = brute_force_h_check(g, 3, r, 2e-3);
            const double v = cqc::h_check(g, 3, r).bits;
            EXPECT_GE(v, coarse - 1e-12);
            EXPECT_LE(v, coarse + 1e-4);
        }
    }
}

TEST(HCheck, StationaryAndFeasible) {
    for (int k = 2; k <= 8; ++k) {
        for (double r : {0.0, 0.1, 0.45, 0.9}) {
            for (int i = 1; i < 20; ++i) {
                const double g = i / 20.0;
                const auto h = cqc::h_check(g, k, r);
                EXPECT_LT(h.kkt_residual, 1e-9) << "k=" << k << " g=" << g << " r=" << r;
                EXPECT_NEAR(h.argmax.mean(), k * g, 1e-8);
            }
        }
    }
}

TEST(ITilde, Examples) {
    EXPECT_NEAR(cqc::i_tilde(0.5, 1, 0.5).bits_per_slot, 0.5, 1e-12);
    for (int k = 1; k <= 8; ++k) {
        EXPECT_EQ(cqc::i_tilde(0.0, k, 0.3).bits_per_slot, 0.0);
        EXPECT_NEAR(cqc::i_tilde(0.4, k, 0.0).bits_per_slot, cqc::h_tilde(0.4, k).bits_per_slot, 1e-6);
    }
}

TEST(ITilde, MaximizerHasTheRequestedMean) {
    for (int k = 1; k <= 6; ++k) {
        const auto v = cqc::i_tilde(0.33, k, 0.15);
        EXPECT_NEAR(v.maximizing_input.mean(), 0.33 * k, 1e-8);
        EXPECT_LE(v.bits_per_slot, cqc::h_tilde(0.33, k).bits_per_slot + 1e-9);
    }
}

TEST(SolveCapacity3User, NoiselessMatchesTwoUser) {
    const auto c3 = cqc::solve_capacity_3user(0.0, 8);
    const auto c2 = cqc::solve_capacity_2user();
    EXPECT_NEAR(c3.capacity_bits_per_slot, c2.capacity_bits_per_slot, 1e-3);
    EXPECT_EQ(c3.tau_star, 1);
}

TEST(SolveCapacity3User, SmallBackgroundPrefersUnitSpacing) {
    for (double r : {0.05, 0.1}) {
        const auto c = cqc::solve_capacity_3user(r, 8);
        EXPECT_EQ(c.tau_star, 1) << "r_p=" << r;
        const double lhs =
            c.alpha * (c.gamma1 + 1.0 / c.tau_star) + (1.0 - c.alpha) * (c.gamma2 + 1.0 / (c.tau_star + 1));
        EXPECT_NEAR(lhs, 1.0 - r, 1e-8);
        EXPECT_GE(c.per_tau.size(), 2u);
        EXPECT_EQ(c.input1.k(), c.tau_star);
        EXPECT_EQ(c.input2.k(), c.tau_star + 1);
    }
}

TEST(SolveCapacity3User, StopsAtFirstDecrease) {
    const auto c = cqc::solve_capacity_3user(0.2, 8);
    ASSERT_GE(c.per_tau.size(), 2u);
    const auto& last = c.per_tau.back();
    const auto& before = c.per_tau[c.per_tau.size() - 2];
    EXPECT_LT(last.value, before.value);
    for (std::size_t i = 0; i + 2 < c.per_tau.size(); ++i) {
        EXPECT_LE(c.per_tau[i].value, c.per_tau[i + 1].value);
    }
    for (const auto& t : c.per_tau) {
        EXPECT_LE(t.value, c.capacity_bits_per_slot + 1e-12);
    }
    EXPECT_GE(c.tau_star, 1);
    EXPECT_LE(c.tau_star, 7);
}

TEST(SolveCapacity3User, ShrinkingFeasibleSet) {
    const auto c = cqc::solve_capacity_3user(0.5, 2);
    EXPECT_GE(c.capacity_bits_per_slot, 0.0);
    EXPECT_EQ(c.tau_star, 1);
    try {
        cqc::solve_capacity_3user(0.6, 2);
        ADD_FAILURE() << "expected infeasible";
    } catch (const cqc::Error& e) {
        EXPECT_EQ(e.code(), Errc::infeasible);
    }
    EXPECT_THROW(cqc::solve_capacity_3user(1.0, 8), cqc::Error);
    EXPECT_THROW(cqc::solve_capacity_3user(0.1, 1), cqc::Error);
}

TEST(NoisyPairConcavity, NoiselessHolds) {
    cqc::CounterRng rng(3);
    for (int s = 0; s < 300; ++s) {
        const int k = 2 + static_cast<int>(cqc::uniform_index(rng, 6));
        EXPECT_GE(cqc::i_concavity_margin(k, cqc::uniform01(rng), cqc::uniform01(rng), 0.0), -1e-9);
    }
}

TEST(NoisyPairConcavity, ZeroRatesGiveZeroMargin) {
    // X = 0 leaves only the binomial, so the entropy terms cancel f exactly.
    for (int k = 2; k <= 7; ++k) {
        for (double r : {0.1, 0.4, 0.75}) {
            EXPECT_NEAR(cqc::i_concavity_margin(k, 0.0, 0.0, r), 0.0, 1e-12);
        }
    }
}

TEST(NoisyPairConcavity, MidpointExample) { EXPECT_GE(cqc::i_concavity_margin(2, 0.5, 0.5, 0.25), -1e-6); }

TEST(NoisyPairConcavity, CounterexampleConfirmedByBruteForce) {
    // Margin near the gamma = 1 corner, recomputed from grid-search entropies.
    const int k = 2;
    const double g1 = 0.933052;
    const double g3 = 0.982534;
    const double r = 0.25;
    const double a = (k - 1.0) / (2.0 * k);
    const double g2 = a * g1 + (1.0 - a) * g3;
    const double f = cqc::binomial_entropy_correction(k, r);
    const double brute = 2.0 * brute_force_h_check(g2, 2, r, 1e-5) - brute_force_h_check(g1, 1, r, 1e-5) -
                         brute_force_h_check(g3, 3, r, 1e-3) + f;
    const double margin = cqc::i_concavity_margin(k, g1, g3, r);
    EXPECT_NEAR(margin, brute, 2e-4);
    EXPECT_LT(margin, -0.018);
}

TEST(NoisyPairConcavity, ReportLocatesWorstMargin) {
    const auto rep = cqc::validate_i_concavity(3, 40, 9);
    EXPECT_EQ(rep.evaluated, 40u);
    EXPECT_EQ(rep.worst_k, 2);
    EXPECT_NEAR(cqc::i_concavity_margin(rep.worst_k, rep.worst_gamma1, rep.worst_gamma3, rep.worst_r_p),
                rep.worst_margin, 1e-12);
    EXPECT_EQ(rep.passed, rep.worst_margin >= -1e-6);
    EXPECT_THROW(cqc::validate_i_concavity(2, 10, 1), cqc::Error);
}

TEST(Cap3Properties, NoiselessReductionOnGrid) {
    const auto r = cqc::check_noiseless_reduction(8, 0.01, 1e-6);
    EXPECT_TRUE(r.passed) << r.worst_margin << " at " << r.where;
}

TEST(Cap3Properties, DataProcessing) {
    const auto r = cqc::check_data_processing(2000, 21);
    EXPECT_TRUE(r.passed) << r.worst_margin << " at " << r.where;
}

TEST(Cap3Properties, FirstArgumentConcavity) {
    const auto r = cqc::check_itilde_first_argument(2000, 22);
    EXPECT_TRUE(r.passed) << r.worst_margin << " at " << r.where;
}

// Not a theorem: with k = 1 the closed form H(Bern(g) * Bern(r)) - h(r) turns
// back up before r = 1/2, and the sweep has to report that.
TEST(Cap3Properties, MonotoneDegradationIsReported) {
    const auto r = cqc::check_monotone_degradation(8, 0.05, 1e-6);
    EXPECT_FALSE(r.passed);
    auto closed = [](double g, double r_p) {
        return output_entropy({1.0 - g, g}, r_p) - cqc::entropy(cqc::binomial_pmf(1, r_p));
    };
    EXPECT_GT(closed(0.15, 0.5), closed(0.15, 0.45) + 1e-3);
    EXPECT_NEAR(cqc::i_tilde(0.15, 1, 0.45).bits_per_slot, closed(0.15, 0.45), 1e-12);
    EXPECT_LE(r.worst_margin, closed(0.15, 0.45) - closed(0.15, 0.5) + 1e-12);
    // Small background rates do degrade the channel.
    for (int k = 1; k <= 8; ++k) {
        for (double g : {0.2, 0.45, 0.7}) {
            EXPECT_GE(cqc::i_tilde(g, k, 0.0).bits_per_slot, cqc::i_tilde(g, k, 0.05).bits_per_slot - 1e-6);
            EXPECT_GE(cqc::i_tilde(g, k, 0.05).bits_per_slot, cqc::i_tilde(g, k, 0.1).bits_per_slot - 1e-6);
        }
    }
}

}  // namespace
