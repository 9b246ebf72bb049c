#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/pmf.hpp"
#include "cqc/rng.hpp"

// Slot-level FCFS queue with unit service. In slot t the slot's arrivals
// join the tail in priority order, then the head of line is served and
// leaves at t + 1, so a packet that finds q packets ahead departs at A + q + 1.

namespace cqc {

enum class User : std::uint8_t { decoder = 0, encoder = 1, background = 2, sentinel = 3 };

inline char user_letter(User u) noexcept {
    switch (u) {
    case User::decoder:
        return 'd';
    case User::encoder:
        return 'e';
    case User::background:
        return 'b';
    case User::sentinel:
        return 's';
    }
    return '?';
}

struct ArrivalSchedule {
    User user;
    std::vector<std::uint8_t> slots;  // 1 = one packet issued in that slot

    std::size_t size() const noexcept { return slots.size(); }
    std::size_t packets() const noexcept {
        return static_cast<std::size_t>(std::count(slots.begin(), slots.end(), std::uint8_t{1}));
    }
};

inline ArrivalSchedule make_schedule(User user, std::vector<std::uint8_t> slots) {
    for (auto s : slots) {
        if (s > 1) {
            throw Error(Errc::domain, "a user issues at most one packet per slot");
        }
    }
    return ArrivalSchedule{user, std::move(slots)};
}

inline ArrivalSchedule bernoulli_schedule(User user, std::size_t n, double rate, CounterRng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw Error(Errc::domain, "arrival rate outside [0, 1]");
    }
    ArrivalSchedule s{user, std::vector<std::uint8_t>(n, 0)};
    for (auto& v : s.slots) {
        v = bernoulli(rng, rate) ? 1 : 0;
    }
    return s;
}

inline constexpr std::int64_t kNotDeparted = -1;

struct PacketRecord {
    User owner;
    std::int64_t arrival;
    std::int64_t departure;  // kNotDeparted if still queued when the run stopped
    std::int64_t ahead;      // queue length found on arrival, q(A)
};

struct SchedulerTrace {
    std::int64_t horizon = 0;             // input slots
    std::vector<PacketRecord> packets;    // in service order, sentinels first
    std::vector<std::uint8_t> arrivals;   // per slot, bit (1 << user) per arriving user
    std::vector<std::int8_t> served;      // per slot, owner served or -1 if idle
    std::vector<std::int64_t> queue_len;  // per slot, packets left after the slot's service
    std::int64_t initial_backlog = 0;

    std::int64_t slots() const noexcept { return static_cast<std::int64_t>(served.size()); }
};

struct SimulateOptions {
    std::int64_t initial_backlog = 0;
    bool drain = true;                   // keep serving past the horizon until empty
    bool encoder_before_background = true;
};

/// Runs the queue over equal-length schedules, one per distinct user.
inline SchedulerTrace simulate(std::span<const ArrivalSchedule> users, const SimulateOptions& opts = {}) {
    if (opts.initial_backlog < 0) {
        throw Error(Errc::domain, "initial backlog must be nonnegative");
    }
    std::size_t n = 0;
    std::vector<const ArrivalSchedule*> order;
    for (const auto& u : users) {
        if (u.user == User::sentinel) {
            throw Error(Errc::domain, "the sentinel user is reserved for backlog packets");
        }
        if (!order.empty() && u.size() != n) {
            throw Error(Errc::length_mismatch, "arrival schedules differ in length");
        }
        for (const auto* o : order) {
            if (o->user == u.user) {
                throw Error(Errc::domain, "duplicate user schedule");
            }
        }
        n = u.size();
        order.push_back(&u);
    }
    auto rank = [&](User u) {
        if (u == User::decoder) {
            return 0;
        }
        const bool enc_first = opts.encoder_before_background;
        return (u == User::encoder) == enc_first ? 1 : 2;
    };
    std::stable_sort(order.begin(), order.end(), [&](auto* a, auto* b) { return rank(a->user) < rank(b->user); });

    SchedulerTrace trace;
    trace.horizon = static_cast<std::int64_t>(n);
    trace.initial_backlog = opts.initial_backlog;
    trace.arrivals.assign(n, 0);
    std::deque<std::size_t> queue;
    for (std::int64_t i = 0; i < opts.initial_backlog; ++i) {
        queue.push_back(trace.packets.size());
        trace.packets.push_back({User::sentinel, 0, kNotDeparted, i});
    }
    for (std::int64_t t = 0;; ++t) {
        const bool input = t < trace.horizon;
        if (!input && (!opts.drain || queue.empty())) {
            break;
        }
        if (input) {
            for (const auto* s : order) {
                if (s->slots[static_cast<std::size_t>(t)]) {
                    trace.arrivals[static_cast<std::size_t>(t)] |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(s->user));
                    const auto ahead = static_cast<std::int64_t>(queue.size());
                    queue.push_back(trace.packets.size());
                    trace.packets.push_back({s->user, t, kNotDeparted, ahead});
                }
            }
        }
        if (queue.empty()) {
            trace.served.push_back(-1);
        } else {
            auto& p = trace.packets[queue.front()];
            queue.pop_front();
            p.departure = t + 1;
            trace.served.push_back(static_cast<std::int8_t>(p.owner));
        }
        trace.queue_len.push_back(static_cast<std::int64_t>(queue.size()));
    }
    return trace;
}

inline SchedulerTrace simulate(const ArrivalSchedule& decoder, const ArrivalSchedule& encoder,
                               const std::optional<ArrivalSchedule>& background, std::int64_t initial_backlog,
                               bool drain = true) {
    std::vector<ArrivalSchedule> users{decoder, encoder};
    if (background) {
        users.push_back(*background);
    }
    SimulateOptions opts;
    opts.initial_backlog = initial_backlog;
    opts.drain = drain;
    return simulate(users, opts);
}

struct ProbeObservation {
    std::int64_t arrival;  // A_i
    int tau;               // A_{i+1} - A_i
    int y;                 // D_{i+1} - D_i - 1
    std::int64_t q;        // q(A_i) = D_i - A_i - 1
    bool buffered;         // q(A_i) >= tau - 1
};

/// Consecutive-probe observations of `probe_owner`, in arrival order.
inline std::vector<ProbeObservation> observe(const SchedulerTrace& trace, User probe_owner = User::decoder) {
    std::vector<const PacketRecord*> probes;
    for (const auto& p : trace.packets) {
        if (p.owner == probe_owner) {
            probes.push_back(&p);
        }
    }
    if (probes.size() < 2) {
        throw Error(Errc::too_few_probes, "need at least two probe packets");
    }
    std::vector<ProbeObservation> out;
    out.reserve(probes.size() - 1);
    for (std::size_t i = 0; i + 1 < probes.size(); ++i) {
        const auto& a = *probes[i];
        const auto& b = *probes[i + 1];
        if (a.departure == kNotDeparted || b.departure == kNotDeparted) {
            break;
        }
        const std::int64_t tau = b.arrival - a.arrival;
        const std::int64_t q = a.departure - a.arrival - 1;
        out.push_back({a.arrival, static_cast<int>(tau), static_cast<int>(b.departure - a.departure - 1), q, q >= tau - 1});
    }
    return out;
}

/// Packets of `s` in each probe window [A_i, A_{i+1}).
inline std::vector<int> window_counts(const ArrivalSchedule& s, std::span<const ProbeObservation> obs) {
    std::vector<int> counts;
    counts.reserve(obs.size());
    for (const auto& o : obs) {
        int c = 0;
        for (std::int64_t t = o.arrival; t < o.arrival + o.tau && t < static_cast<std::int64_t>(s.size()); ++t) {
            c += s.slots[static_cast<std::size_t>(t)];
        }
        counts.push_back(c);
    }
    return counts;
}

/// One CSV row per slot: slot, arrivals_by_user, served_owner, queue_len.
inline void write_trace_csv(std::ostream& os, const SchedulerTrace& trace) {
    os << "slot,arrivals_by_user,served_owner,queue_len\n";
    for (std::int64_t t = 0; t < trace.slots(); ++t) {
        os << t << ',';
        if (t < trace.horizon) {
            const auto mask = trace.arrivals[static_cast<std::size_t>(t)];
            for (User u : {User::decoder, User::encoder, User::background}) {
                if (mask & (1u << static_cast<unsigned>(u))) {
                    os << user_letter(u);
                }
            }
        }
        os << ',';
        const auto served = trace.served[static_cast<std::size_t>(t)];
        if (served >= 0) {
            os << user_letter(static_cast<User>(served));
        }
        os << ',' << trace.queue_len[static_cast<std::size_t>(t)] << '\n';
    }
}

struct StabilityReport {
    double total_rate;
    std::int64_t horizon;
    std::int64_t max_queue;
    std::int64_t final_queue;
    double second_half_mean_queue;
    double drift_constant;        // K = sum r(1 - r) + (1 - total)^2
    double drift_threshold;       // K / (2 (1 - total)); infinite when total >= 1
    double empirical_drift;       // mean q^2 increment over slots with q >= threshold
    double predicted_drift;       // mean of 2 q (total - 1) + K over the same slots
    std::int64_t drift_samples;
    std::uint64_t seed;
};

/// Queue of independent Bernoulli users under unit service, q' = (q + a - 1)^+.
inline StabilityReport stability_probe(std::span<const double> rates, std::int64_t horizon, std::uint64_t seed,
                                       std::int64_t initial_backlog = 0) {
    if (horizon < 1) {
        throw Error(Errc::domain, "horizon must be positive");
    }
    double total = 0.0;
    double var = 0.0;
    for (double r : rates) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw Error(Errc::domain, "arrival rate outside [0, 1]");
        }
        total += r;
        var += r * (1.0 - r);
    }
    StabilityReport rep{};
    rep.total_rate = total;
    rep.horizon = horizon;
    rep.seed = seed;
    rep.drift_constant = var + (1.0 - total) * (1.0 - total);
    rep.drift_threshold = total < 1.0 ? rep.drift_constant / (2.0 * (1.0 - total))
                                      : std::numeric_limits<double>::infinity();
    const double gate = std::max(rep.drift_threshold, 1.0);
    std::vector<CounterRng> streams;
    const CounterRng root(seed);
    for (std::size_t i = 0; i < rates.size(); ++i) {
        streams.push_back(root.split(i));
    }
    std::int64_t q = initial_backlog;
    rep.max_queue = q;
    double second_half = 0.0;
    double drift_sum = 0.0;
    double predicted_sum = 0.0;
    for (std::int64_t t = 0; t < horizon; ++t) {
        std::int64_t a = 0;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            a += bernoulli(streams[i], rates[i]) ? 1 : 0;
        }
        const std::int64_t next = std::max<std::int64_t>(q + a - 1, 0);
        if (static_cast<double>(q) >= gate) {
            drift_sum += static_cast<double>(next * next - q * q);
            predicted_sum += 2.0 * static_cast<double>(q) * (total - 1.0) + rep.drift_constant;
            ++rep.drift_samples;
        }
        q = next;
        rep.max_queue = std::max(rep.max_queue, q);
        if (t >= horizon / 2) {
            second_half += static_cast<double>(q);
        }
    }
    rep.final_queue = q;
    rep.second_half_mean_queue = second_half / static_cast<double>(horizon - horizon / 2);
    if (rep.drift_samples > 0) {
        rep.empirical_drift = drift_sum / static_cast<double>(rep.drift_samples);
        rep.predicted_drift = predicted_sum / static_cast<double>(rep.drift_samples);
    }
    return rep;
}

struct EmpiricalLaw {
    Pmf law;               // empirical law of Y - X on {0..tau}
    Pmf reference;         // Bin(tau, r_p)
    double total_variation;
    double mean;
    std::size_t intervals;
    std::uint64_t seed;
};

/// Probes every tau slots against a slightly overloaded encoder so the queue
/// stays primed, and histograms the background count Y - X per window.
inline EmpiricalLaw empirical_channel_law(int tau, double r_p, std::size_t intervals, std::uint64_t seed) {
    if (tau < 1 || intervals < 1) {
        throw Error(Errc::domain, "need tau >= 1 and at least one interval");
    }
    if (!(r_p >= 0.0 && r_p <= 1.0)) {
        throw Error(Errc::domain, "background rate outside [0, 1]");
    }
    const std::size_t n = static_cast<std::size_t>(tau) * (intervals + 1) + 1;
    const CounterRng root(seed);
    CounterRng enc_rng = root.split(1);
    CounterRng bg_rng = root.split(2);
    ArrivalSchedule probes{User::decoder, std::vector<std::uint8_t>(n, 0)};
    for (std::size_t t = 0; t < n; t += static_cast<std::size_t>(tau)) {
        probes.slots[t] = 1;
    }
    const double enc_rate = std::clamp(1.0 - 1.0 / tau - r_p + 0.02, 0.0, 1.0);
    const auto encoder = bernoulli_schedule(User::encoder, n, enc_rate, enc_rng);
    const auto background = bernoulli_schedule(User::background, n, r_p, bg_rng);
    const auto trace = simulate(probes, encoder, background, tau + 200);
    const auto obs = observe(trace);
    const auto x = window_counts(encoder, obs);
    std::vector<double> hist(static_cast<std::size_t>(tau) + 1, 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < obs.size() && used < intervals; ++i) {
        if (!obs[i].buffered) {
            throw Error(Errc::unbuffered_interval, "queue drained during the channel-law run");
        }
        const int noise = obs[i].y - x[i];
        if (noise < 0 || noise > tau) {
            throw Error(Errc::domain, "background count outside {0..tau}");
        }
        hist[static_cast<std::size_t>(noise)] += 1.0;
        ++used;
    }
    Pmf law = Pmf::from_weights(std::move(hist));
    Pmf ref = binomial_pmf(tau, r_p);
    const double tv = total_variation(law, ref);
    const double mean = law.mean();
    return EmpiricalLaw{std::move(law), std::move(ref), tv, mean, used, seed};
}

}  // namespace cqc
