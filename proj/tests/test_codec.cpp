#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "cqc/codec.hpp"
#include "cqc/ensemble.hpp"

namespace {

using cqc::Codebook;
using cqc::Errc;
using cqc::ProbeObservation;

const cqc::OperatingPoint& noisy_point() {
    static const cqc::OperatingPoint op = cqc::operating_point_3user(0.1);
    return op;
}

template <class Fn>
Errc code_of(Fn&& fn) {
    try {
        fn();
    } catch (const cqc::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected cqc::Error";
    return Errc::parse;
}

TEST(Split, Examples) {
    EXPECT_EQ(cqc::split_alpha_slots(30, 0.170, 1), 6);
    EXPECT_EQ(cqc::split_alpha_slots(60, 0.170, 1), 10);
    EXPECT_EQ(cqc::split_alpha_slots(12, 0.5, 2), 6);
    EXPECT_EQ(cqc::split_alpha_slots(30, 0.0, 1), 0);
    EXPECT_EQ(cqc::split_alpha_slots(4, 0.5, 1), 2);  // 1 and 3 are not admissible, 2 is exact
    EXPECT_EQ(code_of([] { cqc::split_alpha_slots(1, 0.5, 2); }), Errc::domain);
}

TEST(Codebook2User, Structure) {
    const Codebook cb = cqc::build_codebook_2user(30, 16, 0.007, 1);
    EXPECT_EQ(cb.alpha_slots, 6);
    EXPECT_EQ(cb.tau_star, 1);
    const auto w = cb.windows();
    ASSERT_EQ(w.size(), 18u);
    EXPECT_EQ(std::count(w.begin(), w.end(), 1), 6);
    std::set<std::vector<std::uint8_t>> distinct(cb.codewords.begin(), cb.codewords.end());
    EXPECT_EQ(distinct.size(), 16u);
    for (const auto& c : cb.codewords) {
        ASSERT_EQ(c.size(), 30u);
        std::size_t t = 0;
        for (int len : w) {
            if (len == 2) {
                EXPECT_FALSE(c[t] == 0 && c[t + 1] == 1);  // images are ones then zeros
            }
            t += static_cast<std::size_t>(len);
        }
    }
    EXPECT_EQ(cqc::build_codebook_2user(30, 1, 0.007, 1).codewords.size(), 1u);
}

TEST(Codebook2User, OperatingPointLaws) {
    const auto op = cqc::operating_point_2user();
    EXPECT_NEAR(op.p1[1], 0.43, 0.01);
    EXPECT_NEAR(op.p2[0], 0.4297, 0.005);
    EXPECT_NEAR(op.p2[1], 0.3248, 0.005);
    EXPECT_NEAR(op.p2[2], 0.2455, 0.005);
    EXPECT_FALSE(op.r_p.has_value());
}

TEST(Codebook2User, SymbolFrequencies) {
    const auto op = cqc::operating_point_2user();
    const std::vector<int> lengths{1, 2};
    cqc::CounterRng rng(2);
    double c1 = 0.0;
    std::vector<double> c2(3, 0.0);
    const int draws = 100'000;
    for (int i = 0; i < draws; ++i) {
        const auto bits = cqc::sample_codeword(op, lengths, rng);
        c1 += bits[0];
        c2[static_cast<std::size_t>(bits[1] + bits[2])] += 1.0;
    }
    EXPECT_NEAR(c1 / draws, op.p1[1], 0.01);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_NEAR(c2[s] / draws, op.p2[s], 0.01);
    }
}

// Expected encoder load plus probes per block. The closing probe at slot n
// opens the next block when blocks run back to back, so it is not counted.
TEST(Codebook2User, ExpectedLoadFitsTheBlock) {
    const auto op = cqc::operating_point_2user();
    for (int n : {30, 60, 120, 240}) {
        const Codebook cb = cqc::build_codebook(n, 4, op, 1);
        const auto probes = cqc::probe_stream(cqc::probe_template(cb));
        double load = static_cast<double>(probes.packets());
        for (int len : cb.windows()) {
            load += len == 1 ? op.p1.mean() : op.p2.mean();
        }
        EXPECT_LE(load / n, 1.0 + 1.0 / n) << "n=" << n;
    }
}

TEST(Codebook3User, NoiselessDegeneratesToTwoUser) {
    const auto op3 = cqc::operating_point_3user(0.0);
    const auto op2 = cqc::operating_point_2user();
    EXPECT_EQ(op3.tau_star, 1);
    EXPECT_NEAR(op3.alpha, op2.alpha, 0.01);
    EXPECT_NEAR(op3.p1[1], op2.p1[1], 0.01);
    for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_NEAR(op3.p2[s], op2.p2[s], 0.01);
    }
}

TEST(Codebook3User, SymbolImages) {
    EXPECT_EQ(cqc::symbol_image(1, 3), (std::vector<std::uint8_t>{1, 0, 0}));
    EXPECT_EQ(cqc::symbol_image(0, 2), (std::vector<std::uint8_t>{0, 0}));
    EXPECT_EQ(cqc::symbol_image(2, 2), (std::vector<std::uint8_t>{1, 1}));
    EXPECT_EQ(code_of([] { cqc::symbol_image(3, 2); }), Errc::domain);
    const auto& op = noisy_point();
    EXPECT_EQ(op.p1.k(), op.tau_star);
    EXPECT_EQ(op.p2.k(), op.tau_star + 1);
}

TEST(ProbeStream, Examples) {
    EXPECT_EQ(cqc::probe_stream({6, 2, 1}).slots, (std::vector<std::uint8_t>{1, 1, 1, 0, 1, 0}));
    EXPECT_EQ(cqc::probe_stream({4, 0, 1}).slots, (std::vector<std::uint8_t>{1, 0, 1, 0}));
    const auto s = cqc::probe_stream({12, 6, 2});
    std::vector<std::size_t> at;
    for (std::size_t t = 0; t < s.size(); ++t) {
        if (s.slots[t]) {
            at.push_back(t);
        }
    }
    EXPECT_EQ(at, (std::vector<std::size_t>{0, 2, 4, 6, 9}));
}

// One window of each length: with enough backlog the decoder counts exactly
// the symbol, so the symbol map is recoverable.
TEST(Decode, WindowSymbolsAreRecovered) {
    for (int tau = 1; tau <= 4; ++tau) {
        for (int len : {tau, tau + 1}) {
            for (int s = 0; s <= len; ++s) {
                auto bits = cqc::symbol_image(s, len);
                bits.push_back(0);
                cqc::ArrivalSchedule probes{cqc::User::decoder, std::vector<std::uint8_t>(bits.size(), 0)};
                probes.slots.front() = 1;
                probes.slots.back() = 1;
                const auto b = cqc::required_backlog(bits, probes);
                const auto obs = cqc::observe(
                    cqc::simulate(probes, cqc::make_schedule(cqc::User::encoder, bits), std::nullopt, b));
                ASSERT_EQ(obs.size(), 1u);
                EXPECT_TRUE(obs[0].buffered);
                EXPECT_EQ(obs[0].y, s);
            }
        }
    }
}

TEST(Decode, RoundTripEveryMessage) {
    const Codebook cb = cqc::build_codebook_2user(30, 16, 0.007, 3);
    const auto b = cqc::default_backlog(cb);
    cqc::CounterRng rng(1);
    for (std::size_t m = 0; m < cb.M; ++m) {
        EXPECT_EQ(cqc::transmit_once(cb, m, {}, b, rng), m);
    }
    const auto rep = cqc::run_transmission(cb, {}, 500, 4);
    EXPECT_EQ(rep.errors, 0u);
    EXPECT_NEAR(rep.empirical_rate_bits_per_slot, 4.0 / 30.0, 1e-12);
}

TEST(Decode, Errors) {
    const Codebook cb = cqc::build_codebook_2user(30, 4, 0.007, 3);
    cqc::CounterRng rng(1);
    auto idle = cb;  // an empty codeword drains the queue before the first long window
    idle.codewords[0].assign(30, 0);
    EXPECT_EQ(code_of([&] { cqc::transmit_once(idle, 0, {}, 0, rng); }), Errc::unbuffered_interval);

    const auto w = cb.windows();
    std::vector<ProbeObservation> obs;
    for (int len : w) {
        obs.push_back({0, len, len, 10, true});  // every window full
    }
    bool any_full = false;
    for (const auto& c : cb.codewords) {
        any_full = any_full || std::count(c.begin(), c.end(), std::uint8_t{1}) == 30;
    }
    if (!any_full) {
        EXPECT_EQ(code_of([&] { cqc::decode_2user(obs, cb); }), Errc::no_match);
    }
    obs.pop_back();
    EXPECT_EQ(code_of([&] { cqc::decode_2user(obs, cb); }), Errc::length_mismatch);
}

TEST(Decode, NoiselessMaximumLikelihoodMatchesLookup) {
    const Codebook cb = cqc::build_codebook_2user(30, 16, 0.007, 5);
    const auto probes = cqc::detail::closed_probe_stream(cqc::probe_template(cb));
    const auto b = cqc::default_backlog(cb);
    cqc::CounterRng rng(6);
    const cqc::Decoder2User d2(cb);
    const cqc::Decoder3User d3(cb, 0.0);
    for (int i = 0; i < 1000; ++i) {
        const auto m = static_cast<std::size_t>(cqc::uniform_index(rng, cb.M));
        const auto obs = cqc::detail::run_block(probes, cb.codewords[m], {}, b, rng);
        EXPECT_EQ(d3(obs), d2(obs));
        EXPECT_EQ(d2(obs), m);
    }
}

TEST(Decode, MaximumLikelihoodExample) {
    const Codebook cb{2, 2, 2, 1, 0, {{0, 0}, {1, 1}}};
    const std::vector<ProbeObservation> both{{0, 1, 1, 5, true}, {1, 1, 1, 5, true}};
    EXPECT_EQ(cqc::decode_3user(both, cb, 0.3), 1u);
    const std::vector<ProbeObservation> one{{0, 1, 1, 5, true}, {1, 1, 0, 5, true}};
    EXPECT_EQ(cqc::decode_3user(one, cb, 0.3), 0u);
    EXPECT_EQ(cqc::decode_3user(both, cb, 0.8), 0u);
    const Codebook tie{2, 2, 2, 1, 0, {{1, 0}, {0, 1}}};
    EXPECT_EQ(cqc::decode_3user(both, tie, 0.3), 0u);
}

TEST(Decode, SmallNoisyCodebookIsReliable) {
    const Codebook cb = cqc::build_codebook(60, 2, noisy_point(), 7);
    const auto rep = cqc::run_transmission(cb, {0.1}, 2000, 8);
    EXPECT_LT(rep.empirical_error_rate, 0.05);
    EXPECT_EQ(rep.messages_sent, 2000u);
}

TEST(RequiredBacklog, IsTheSmallestThatWorks) {
    const auto op = cqc::operating_point_2user();
    cqc::CounterRng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 10 + static_cast<int>(cqc::uniform_index(rng, 40));
        const int a = cqc::split_alpha_slots(n, op.alpha, 1);
        const auto lengths = cqc::window_lengths(n, a, 1);
        auto bits = cqc::sample_codeword(op, lengths, rng);
        const auto probes = cqc::detail::closed_probe_stream({n, a, 1});
        bits.push_back(0);
        const auto need = cqc::required_backlog(bits, probes);
        auto ok = [&](std::int64_t b) {
            const auto tr = cqc::simulate(probes, cqc::make_schedule(cqc::User::encoder, bits), std::nullopt, b);
            for (std::int64_t t = 0; t < tr.horizon; ++t) {
                if (tr.served[static_cast<std::size_t>(t)] < 0) {
                    return false;
                }
            }
            for (const auto& o : cqc::observe(tr)) {
                if (!o.buffered) {
                    return false;
                }
            }
            return true;
        };
        EXPECT_TRUE(ok(need));
        if (need > 0) {
            EXPECT_FALSE(ok(need - 1));
        }
    }
}

TEST(CodebookIo, RoundTrip) {
    const Codebook cb = cqc::build_codebook_2user(30, 16, 0.007, 10);
    std::stringstream ss;
    cqc::write_codebook(ss, cb);
    const Codebook back = cqc::read_codebook(ss);
    EXPECT_EQ(back.n, cb.n);
    EXPECT_EQ(back.M, cb.M);
    EXPECT_EQ(back.alpha_slots, cb.alpha_slots);
    EXPECT_EQ(back.tau_star, cb.tau_star);
    EXPECT_EQ(back.seed, cb.seed);
    EXPECT_EQ(back.codewords, cb.codewords);
}

TEST(CodebookIo, ParseErrors) {
    for (const char* text : {"", "3 1 1\n", "4 1 2 1 0 extra\n1100\n", "4 1 2 1 0\n110\n", "4 1 2 1 0\n11x0\n",
                             "4 2 2 1 0\n1100\n", "4 1 1 1 0\n1100\n"}) {
        std::istringstream is(text);
        EXPECT_EQ(code_of([&] { cqc::read_codebook(is); }), Errc::parse) << text;
    }
}

TEST(CodebookBuild, CollisionExhaustion) {
    // A single window of length 2 leaves three possible codewords.
    EXPECT_EQ(code_of([] { cqc::build_codebook(2, 5, cqc::operating_point_2user(0.0), 1); }),
              Errc::collision_exhaustion);
}

// Brute force over explicit i.i.d. codebooks, duplicates allowed, decoded
// through the simulated queue with lowest-index tie-breaking.
TEST(Ensemble, AgreesWithExplicitCodebooks) {
    const auto& op = noisy_point();
    const int n = 12;
    const std::size_t M = 8;
    const auto rep = cqc::estimate_ensemble_error(op, n, 3.0, 4000, 11);
    const int a = cqc::split_alpha_slots(n, op.alpha, op.tau_star);
    const auto lengths = cqc::window_lengths(n, a, op.tau_star);
    const auto probes = cqc::detail::closed_probe_stream({n, a, op.tau_star});
    const int trials = 20'000;
    std::vector<std::uint8_t> wrong(trials, 0);
    const cqc::CounterRng root(12);
    cqc::parallel_for(trials, [&](std::size_t i) {
        cqc::CounterRng rng = root.split(i);
        Codebook cb{n, M, a, op.tau_star, 0, {}};
        for (std::size_t m = 0; m < M; ++m) {
            cb.codewords.push_back(cqc::sample_codeword(op, lengths, rng));
        }
        const auto sent = static_cast<std::size_t>(cqc::uniform_index(rng, M));
        const auto b = std::max<std::int64_t>(op.tau_star + 1,
                                              cqc::required_backlog(cqc::detail::padded(cb.codewords[sent]), probes));
        const auto obs = cqc::detail::run_block(probes, cb.codewords[sent], {0.1}, b, rng);
        wrong[i] = cqc::decode_3user(obs, cb, 0.1) != sent ? 1 : 0;
    });
    const double p = static_cast<double>(std::count(wrong.begin(), wrong.end(), std::uint8_t{1})) / trials;
    const double se = std::sqrt(p * (1.0 - p) / trials);
    EXPECT_NEAR(rep.mean_error, p, 4.0 * std::hypot(se, rep.std_error)) << rep.mean_error << " vs " << p;
    EXPECT_GT(p, 0.0);
}

TEST(Ensemble, CorrectProbabilityClosedForm) {
    EXPECT_EQ(cqc::detail::ensemble_correct_probability(0.3, 0.1, 0.0), 1.0);
    // M = 2: win outright or win the tie half the time.
    EXPECT_NEAR(cqc::detail::ensemble_correct_probability(0.3, 0.2, 1.0), 0.5 + 0.2 / 2.0, 1e-12);
    EXPECT_NEAR(cqc::detail::ensemble_correct_probability(0.3, 0.0, 3.0), std::pow(0.7, 7.0), 1e-12);
    EXPECT_THROW(cqc::estimate_ensemble_error(cqc::operating_point_2user(), 30, 2.0, 10, 1), cqc::Error);
}

}  // namespace
