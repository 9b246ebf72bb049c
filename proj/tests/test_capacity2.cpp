#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "cqc/capacity2.hpp"
#include "cqc/rng.hpp"

namespace {

using cqc::Capacity2Options;
using cqc::Errc;

TEST(Objective2User, Examples) {
    EXPECT_NEAR(cqc::objective_2user(0.177, 0.43, 0.407), 0.8114, 5e-4);
    EXPECT_EQ(cqc::objective_2user(1.0, 0.0, 0.3), 0.0);
    EXPECT_NEAR(cqc::objective_2user(0.0, 0.2, 0.5), std::log2(3.0) / 2.0, 1e-12);
}

TEST(Objective2User, BoxViolation) {
    for (auto [a, g1, g2] : {std::tuple{1.1, 0.1, 0.1}, std::tuple{0.5, 0.6, 0.1}, std::tuple{0.5, 0.1, -0.01}}) {
        try {
            cqc::objective_2user(a, g1, g2);
            ADD_FAILURE() << "expected box violation";
        } catch (const cqc::Error& e) {
            EXPECT_EQ(e.code(), Errc::box_violation);
        }
    }
}

TEST(SolveCapacity2User, GlobalOptimum) {
    const auto start = std::chrono::steady_clock::now();
    const auto r = cqc::solve_capacity_2user(1e-12);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_NEAR(r.capacity_bits_per_slot, 0.8114, 5e-4);
    EXPECT_NEAR(r.alpha, 0.177, 0.01);
    EXPECT_NEAR(r.gamma1, 0.43, 0.01);
    EXPECT_NEAR(r.gamma2, 0.407, 0.01);
    EXPECT_LT(r.constraint_residual, 1e-9);
    EXPECT_LT(secs, 5.0);
    EXPECT_GE(r.alpha, 0.0);
    EXPECT_LE(r.alpha, 1.0);
    EXPECT_GE(r.gamma1, 0.0);
    EXPECT_LE(r.gamma1, 0.5);
    EXPECT_GE(r.gamma2, 0.0);
    EXPECT_LE(r.gamma2, 0.5);
    const double lhs = r.alpha * (r.gamma1 + 1.0) + (1.0 - r.alpha) * (r.gamma2 + 0.5);
    EXPECT_NEAR(lhs, 1.0, 1e-9);
    EXPECT_NEAR(cqc::objective_2user(r.alpha, r.gamma1, r.gamma2), r.capacity_bits_per_slot, 1e-12);
}

TEST(SolveCapacity2User, Slices) {
    Capacity2Options a0;
    a0.slice.alpha = 0.0;
    EXPECT_NEAR(cqc::solve_capacity_2user(a0).capacity_bits_per_slot, std::log2(3.0) / 2.0, 1e-9);

    Capacity2Options zero;
    zero.slice.gamma1 = 0.0;
    zero.slice.gamma2 = 0.0;
    const auto z = cqc::solve_capacity_2user(zero);
    EXPECT_EQ(z.capacity_bits_per_slot, 0.0);
    EXPECT_NEAR(z.alpha, 1.0, 1e-12);  // the constraint pins alpha when both rates vanish
}

TEST(SolveCapacity2User, RejectsNonpositiveTolerance) {
    EXPECT_THROW(cqc::solve_capacity_2user(0.0), cqc::Error);
}

TEST(SolveCapacity2User, BeatsEveryFeasibleGridPoint) {
    const double best = cqc::solve_capacity_2user().capacity_bits_per_slot;
    for (int i = 0; i <= 200; ++i) {
        for (int j = 0; j <= 100; ++j) {
            const double a = i / 200.0;
            const double g1 = j / 200.0;
            if (a >= 1.0) {
                continue;
            }
            const double g2 = (1.0 - a * (g1 + 1.0)) / (1.0 - a) - 0.5;
            if (g2 < 0.0 || g2 > 0.5) {
                continue;
            }
            EXPECT_LE(cqc::objective_2user(a, g1, g2), best + 1e-12);
        }
    }
}

// In (alpha, alpha g1, (1 - alpha) g2) the constraint is linear and the
// objective is a sum of perspectives, so midpoints stay feasible.
TEST(SolveCapacity2User, ConcaveAlongConstraint) {
    cqc::CounterRng rng(5);
    auto sample = [&]() {
        for (;;) {
            const double a = cqc::uniform01(rng);
            const double g1 = 0.5 * cqc::uniform01(rng);
            const double g2 = (1.0 - a * (g1 + 1.0)) / (1.0 - a) - 0.5;
            if (g2 >= 0.0 && g2 <= 0.5) {
                return std::array<double, 3>{a, a * g1, (1.0 - a) * g2};
            }
        }
    };
    auto value = [](const std::array<double, 3>& p) {
        const double a = p[0];
        const double g1 = a > 0.0 ? p[1] / a : 0.0;
        const double g2 = a < 1.0 ? p[2] / (1.0 - a) : 0.0;
        return cqc::objective_2user(a, std::min(g1, 0.5), std::min(g2, 0.5));
    };
    for (int s = 0; s < 2000; ++s) {
        const auto p = sample();
        const auto q = sample();
        const std::array<double, 3> mid{(p[0] + q[0]) / 2, (p[1] + q[1]) / 2, (p[2] + q[2]) / 2};
        EXPECT_NEAR(mid[0] + mid[1] + (1.0 - mid[0]) / 2 + mid[2], 1.0, 1e-12);
        EXPECT_GE(value(mid), (value(p) + value(q)) / 2 - 1e-9);
    }
}

}  // namespace
