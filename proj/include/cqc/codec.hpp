#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cqc/capacity2.hpp"
#include "cqc/capacity3.hpp"
#include "cqc/error.hpp"
#include "cqc/parallel.hpp"
#include "cqc/pmf.hpp"
#include "cqc/rng.hpp"
#include "cqc/scheduler.hpp"
#include "cqc/tilt.hpp"

namespace cqc {

inline constexpr double kDefaultDelta = 1e-3;

/// Symbol laws for the two window lengths of a block: P1 on {0..tau} for
/// the first segment, P2 on {0..tau+1} for the second.
struct OperatingPoint {
    int tau_star;
    double alpha;
    Pmf p1;
    Pmf p2;
    std::optional<double> r_p;  // background rate, none for the two-user system
};

inline void check_delta(double delta) {
    if (!(delta >= 0.0 && delta < 1.0)) {
        throw Error(Errc::domain, "delta must lie in [0, 1)");
    }
}

inline OperatingPoint operating_point_2user(double delta = kDefaultDelta) {
    check_delta(delta);
    const CapacityResult2 c = solve_capacity_2user();
    Pmf p1({1.0 - c.gamma1, c.gamma1});
    Pmf p2 = c.gamma2 > 0.0 ? solve_tilt(2, 2.0 * c.gamma2).pmf : Pmf::point_mass(2, 0);
    return OperatingPoint{1, std::max(0.0, c.alpha - delta), std::move(p1), std::move(p2), std::nullopt};
}

inline OperatingPoint operating_point_3user(double r_p, int tau_max = kDefaultTauMax, double delta = kDefaultDelta) {
    check_delta(delta);
    CapacityResult3 c = solve_capacity_3user(r_p, tau_max);
    return OperatingPoint{c.tau_star, std::max(0.0, c.alpha - delta), std::move(c.input1), std::move(c.input2), r_p};
}

/// Slot count of the first segment: the admissible split (multiple of tau,
/// remainder a multiple of tau + 1) nearest to alpha n; ties go low.
inline int split_alpha_slots(int n, double alpha, int tau_star) {
    if (n < 1 || tau_star < 1 || !(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(Errc::domain, "split needs n >= 1, tau >= 1, alpha in [0, 1]");
    }
    const double target = alpha * n;
    std::optional<int> best;
    for (int a = 0; a <= n; a += tau_star) {
        if ((n - a) % (tau_star + 1) != 0) {
            continue;
        }
        if (!best || std::abs(a - target) < std::abs(*best - target) - 1e-12) {
            best = a;
        }
    }
    if (!best) {
        throw Error(Errc::domain, "no admissible segment split for n=" + std::to_string(n));
    }
    return *best;
}

inline std::vector<int> window_lengths(int n, int alpha_slots, int tau_star) {
    if (alpha_slots < 0 || alpha_slots > n || alpha_slots % tau_star != 0 || (n - alpha_slots) % (tau_star + 1) != 0) {
        throw Error(Errc::domain, "segment split does not tile the block");
    }
    std::vector<int> lengths(static_cast<std::size_t>(alpha_slots / tau_star), tau_star);
    lengths.insert(lengths.end(), static_cast<std::size_t>((n - alpha_slots) / (tau_star + 1)), tau_star + 1);
    return lengths;
}

/// Symbol i on a window of `length` slots: i ones, then zeros.
inline std::vector<std::uint8_t> symbol_image(int symbol, int length) {
    if (symbol < 0 || symbol > length) {
        throw Error(Errc::domain, "symbol does not fit its window");
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(length), 0);
    std::fill_n(bits.begin(), symbol, std::uint8_t{1});
    return bits;
}

struct Codebook {
    int n;
    std::size_t M;
    int alpha_slots;
    int tau_star;
    std::uint64_t seed;
    std::vector<std::vector<std::uint8_t>> codewords;

    std::vector<int> windows() const { return window_lengths(n, alpha_slots, tau_star); }
};

/// Packets per window of a binary stream tiled by `lengths`.
inline std::vector<int> stream_counts(const std::vector<std::uint8_t>& bits, const std::vector<int>& lengths) {
    std::vector<int> counts;
    counts.reserve(lengths.size());
    std::size_t t = 0;
    for (int len : lengths) {
        int c = 0;
        for (int j = 0; j < len; ++j) {
            c += bits[t++];
        }
        counts.push_back(c);
    }
    return counts;
}

/// Draws one codeword symbol by symbol from the operating point's laws.
inline std::vector<std::uint8_t> sample_codeword(const OperatingPoint& op, const std::vector<int>& lengths,
                                                 CounterRng& rng) {
    std::vector<std::uint8_t> bits;
    for (int len : lengths) {
        const Pmf& law = len == op.tau_star ? op.p1 : op.p2;
        const int symbol = static_cast<int>(sample_index(rng, law.probs()));
        const auto image = symbol_image(symbol, len);
        bits.insert(bits.end(), image.begin(), image.end());
    }
    return bits;
}

inline Codebook build_codebook(int n, std::size_t M, const OperatingPoint& op, std::uint64_t seed) {
    if (M < 1) {
        throw Error(Errc::domain, "codebook needs at least one message");
    }
    if (op.p1.k() != op.tau_star || op.p2.k() != op.tau_star + 1) {
        throw Error(Errc::support_mismatch, "symbol laws do not match the window lengths");
    }
    const int alpha_slots = split_alpha_slots(n, op.alpha, op.tau_star);
    const auto lengths = window_lengths(n, alpha_slots, op.tau_star);
    Codebook cb{n, M, alpha_slots, op.tau_star, seed, {}};
    cb.codewords.reserve(M);
    std::unordered_set<std::string> seen;
    CounterRng rng(seed);
    const std::size_t budget = 100 * M;
    for (std::size_t attempt = 0; cb.codewords.size() < M; ++attempt) {
        if (attempt >= budget) {
            throw Error(Errc::collision_exhaustion,
                        std::to_string(cb.codewords.size()) + " distinct codewords after " + std::to_string(budget) +
                            " draws");
        }
        auto bits = sample_codeword(op, lengths, rng);
        if (seen.emplace(bits.begin(), bits.end()).second) {
            cb.codewords.push_back(std::move(bits));
        }
    }
    return cb;
}

inline Codebook build_codebook_2user(int n, std::size_t M, double delta, std::uint64_t seed) {
    return build_codebook(n, M, operating_point_2user(delta), seed);
}

inline Codebook build_codebook_3user(int n, std::size_t M, double r_p, int tau_max, double delta, std::uint64_t seed) {
    return build_codebook(n, M, operating_point_3user(r_p, tau_max, delta), seed);
}

struct ProbeTemplate {
    int n;
    int alpha_slots;
    int tau_star;
};

/// Decoder packets at every window start of the block.
inline ArrivalSchedule probe_stream(const ProbeTemplate& tpl) {
    const auto lengths = window_lengths(tpl.n, tpl.alpha_slots, tpl.tau_star);
    ArrivalSchedule s{User::decoder, std::vector<std::uint8_t>(static_cast<std::size_t>(tpl.n), 0)};
    std::size_t t = 0;
    for (int len : lengths) {
        s.slots[t] = 1;
        t += static_cast<std::size_t>(len);
    }
    return s;
}

inline ProbeTemplate probe_template(const Codebook& cb) { return {cb.n, cb.alpha_slots, cb.tau_star}; }

namespace detail {

inline std::string count_key(const std::vector<int>& counts) { return std::string(counts.begin(), counts.end()); }

inline void check_windows(std::span<const ProbeObservation> obs, const std::vector<int>& lengths) {
    if (obs.size() != lengths.size()) {
        throw Error(Errc::length_mismatch, "observed " + std::to_string(obs.size()) + " windows, codebook has " +
                                               std::to_string(lengths.size()));
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].tau != lengths[i]) {
            throw Error(Errc::length_mismatch, "probe spacing does not match the codebook windows");
        }
    }
}

}  // namespace detail

/// Exact count-sequence lookup; window counts identify the codeword because
/// each window's symbol map is injective.
class Decoder2User {
public:
    explicit Decoder2User(const Codebook& cb) : lengths_(cb.windows()) {
        index_.reserve(cb.codewords.size());
        for (std::size_t m = 0; m < cb.codewords.size(); ++m) {
            index_.emplace(detail::count_key(stream_counts(cb.codewords[m], lengths_)), m);
        }
    }

    std::size_t operator()(std::span<const ProbeObservation> obs) const {
        detail::check_windows(obs, lengths_);
        std::vector<int> y;
        y.reserve(obs.size());
        for (const auto& o : obs) {
            if (!o.buffered) {
                throw Error(Errc::unbuffered_interval, "decoding needs every interval buffered");
            }
            y.push_back(o.y);
        }
        const auto it = index_.find(detail::count_key(y));
        if (it == index_.end()) {
            throw Error(Errc::no_match, "observed counts match no codeword");
        }
        return it->second;
    }

private:
    std::vector<int> lengths_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline std::size_t decode_2user(std::span<const ProbeObservation> obs, const Codebook& cb) {
    return Decoder2User(cb)(obs);
}

/// Maximum-likelihood decoding through Y = X + Bin(tau, r_p); ties go to the
/// lowest message index.
class Decoder3User {
public:
    Decoder3User(const Codebook& cb, double r_p) : lengths_(cb.windows()) {
        check_background_rate(r_p);
        counts_.reserve(cb.codewords.size());
        for (const auto& w : cb.codewords) {
            counts_.push_back(stream_counts(w, lengths_));
        }
        for (int len : {cb.tau_star, cb.tau_star + 1}) {
            const Pmf noise = binomial_pmf(len, r_p);
            auto& table = log_noise_[len == cb.tau_star ? 0 : 1];
            for (double p : noise.probs()) {
                table.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
            }
        }
        tau_ = cb.tau_star;
    }

    double log_likelihood(std::span<const ProbeObservation> obs, std::size_t m) const {
        double ll = 0.0;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const int d = obs[i].y - counts_[m][i];
            const auto& table = log_noise_[lengths_[i] == tau_ ? 0 : 1];
            if (d < 0 || d >= static_cast<int>(table.size())) {
                return -std::numeric_limits<double>::infinity();
            }
            ll += table[static_cast<std::size_t>(d)];
        }
        return ll;
    }

    std::size_t operator()(std::span<const ProbeObservation> obs) const {
        detail::check_windows(obs, lengths_);
        for (const auto& o : obs) {
            if (!o.buffered) {
                throw Error(Errc::unbuffered_interval, "decoding needs every interval buffered");
            }
        }
        std::size_t best = 0;
        double best_ll = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < counts_.size(); ++m) {
            const double ll = log_likelihood(obs, m);
            if (ll > best_ll) {
                best_ll = ll;
                best = m;
            }
        }
        return best;
    }

private:
    std::vector<int> lengths_;
    std::vector<std::vector<int>> counts_;
    std::vector<double> log_noise_[2];
    int tau_ = 1;
};

inline std::size_t decode_3user(std::span<const ProbeObservation> obs, const Codebook& cb, double r_p) {
    return Decoder3User(cb, r_p)(obs);
}

/// Smallest sentinel backlog that keeps every probe interval buffered for
/// this encoder stream, ignoring background traffic (which only adds
/// queue). Probe and encoder streams carry the closing probe slot.
inline std::int64_t required_backlog(const std::vector<std::uint8_t>& encoder, const ArrivalSchedule& probes) {
    if (encoder.size() != probes.size()) {
        throw Error(Errc::length_mismatch, "encoder and probe streams differ in length");
    }
    std::vector<std::size_t> probe_slots;
    for (std::size_t t = 0; t < probes.size(); ++t) {
        if (probes.slots[t]) {
            probe_slots.push_back(t);
        }
    }
    std::int64_t need = 0;
    std::int64_t drift = 0;  // arrivals minus services before slot t
    std::size_t next_probe = 0;
    for (std::size_t t = 0; t < encoder.size(); ++t) {
        const std::int64_t arrivals = encoder[t] + probes.slots[t];
        if (next_probe < probe_slots.size() && probe_slots[next_probe] == t) {
            if (next_probe + 1 < probe_slots.size()) {
                const auto tau = static_cast<std::int64_t>(probe_slots[next_probe + 1] - t);
                need = std::max(need, tau - 1 - drift);
            }
            ++next_probe;
        }
        need = std::max(need, 1 - arrivals - drift);  // no idle slot
        drift += arrivals - 1;
    }
    return need;
}

namespace detail {

inline std::vector<std::uint8_t> padded(const std::vector<std::uint8_t>& bits) {
    auto out = bits;
    out.push_back(0);
    return out;
}

/// Probe stream with the closing probe at slot n.
inline ArrivalSchedule closed_probe_stream(const ProbeTemplate& tpl) {
    auto s = probe_stream(tpl);
    s.slots.push_back(1);
    return s;
}

}  // namespace detail

inline std::int64_t default_backlog(const Codebook& cb) {
    const auto probes = detail::closed_probe_stream(probe_template(cb));
    std::int64_t b = cb.tau_star + 1;
    for (const auto& w : cb.codewords) {
        b = std::max(b, required_backlog(detail::padded(w), probes));
    }
    return b;
}

struct ChannelConfig {
    std::optional<double> background_rate;
};

struct TransmissionReport {
    std::size_t messages_sent;
    std::size_t errors;
    double empirical_error_rate;
    double empirical_rate_bits_per_slot;
    std::int64_t initial_backlog;
    std::uint64_t seed;
};

namespace detail {

/// Simulates one block and returns its probe observations, all buffered.
inline std::vector<ProbeObservation> run_block(const ArrivalSchedule& probes, const std::vector<std::uint8_t>& codeword,
                                               const ChannelConfig& channel, std::int64_t backlog, CounterRng& rng,
                                               SchedulerTrace* trace_out = nullptr) {
    const auto encoder = make_schedule(User::encoder, padded(codeword));
    std::optional<ArrivalSchedule> background;
    if (channel.background_rate) {
        background = bernoulli_schedule(User::background, probes.size(), *channel.background_rate, rng);
    }
    auto trace = simulate(probes, encoder, background, backlog);
    auto obs = observe(trace);
    for (const auto& o : obs) {
        if (!o.buffered) {
            throw Error(Errc::unbuffered_interval,
                        "probe at slot " + std::to_string(o.arrival) + " found " + std::to_string(o.q) + " ahead");
        }
    }
    if (trace_out) {
        *trace_out = std::move(trace);
    }
    return obs;
}

}  // namespace detail

/// Sends `message` through one simulated block and decodes it.
inline std::size_t transmit_once(const Codebook& cb, std::size_t message, const ChannelConfig& channel,
                                 std::int64_t backlog, CounterRng& rng, SchedulerTrace* trace_out = nullptr) {
    const auto probes = detail::closed_probe_stream(probe_template(cb));
    const auto obs = detail::run_block(probes, cb.codewords.at(message), channel, backlog, rng, trace_out);
    return channel.background_rate ? decode_3user(obs, cb, *channel.background_rate) : decode_2user(obs, cb);
}

inline TransmissionReport run_transmission(const Codebook& cb, const ChannelConfig& channel, std::size_t trials,
                                           std::uint64_t seed, std::optional<std::int64_t> backlog = std::nullopt) {
    if (channel.background_rate) {
        check_background_rate(*channel.background_rate);
    }
    const std::int64_t b = backlog ? *backlog : default_backlog(cb);
    const auto probes = detail::closed_probe_stream(probe_template(cb));
    std::optional<Decoder2User> dec2;
    std::optional<Decoder3User> dec3;
    if (channel.background_rate) {
        dec3.emplace(cb, *channel.background_rate);
    } else {
        dec2.emplace(cb);
    }
    std::vector<std::uint8_t> wrong(trials, 0);
    const CounterRng root(seed);
    parallel_for(trials, [&](std::size_t i) {
        CounterRng rng = root.split(i);
        const auto message = static_cast<std::size_t>(uniform_index(rng, cb.M));
        const auto obs = detail::run_block(probes, cb.codewords[message], channel, b, rng);
        const std::size_t decoded = dec3 ? (*dec3)(obs) : (*dec2)(obs);
        wrong[i] = decoded != message ? 1 : 0;
    });
    const auto errors = static_cast<std::size_t>(std::count(wrong.begin(), wrong.end(), std::uint8_t{1}));
    return TransmissionReport{trials,
                              errors,
                              trials ? static_cast<double>(errors) / static_cast<double>(trials) : 0.0,
                              std::log2(static_cast<double>(cb.M)) / cb.n,
                              b,
                              seed};
}

/// Header line "n M alpha_slots tau_star seed", then one bitstring per line.
inline void write_codebook(std::ostream& os, const Codebook& cb) {
    os << cb.n << ' ' << cb.M << ' ' << cb.alpha_slots << ' ' << cb.tau_star << ' ' << cb.seed << '\n';
    for (const auto& w : cb.codewords) {
        for (auto b : w) {
            os << (b ? '1' : '0');
        }
        os << '\n';
    }
}

inline Codebook read_codebook(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw Error(Errc::parse, "missing codebook header");
    }
    std::istringstream header(line);
    Codebook cb{};
    if (!(header >> cb.n >> cb.M >> cb.alpha_slots >> cb.tau_star >> cb.seed) || cb.n < 1 || cb.tau_star < 1) {
        throw Error(Errc::parse, "malformed codebook header: " + line);
    }
    std::string trailing;
    if (header >> trailing) {
        throw Error(Errc::parse, "trailing tokens in codebook header");
    }
    try {
        (void)window_lengths(cb.n, cb.alpha_slots, cb.tau_star);
    } catch (const Error&) {
        throw Error(Errc::parse, "codebook header split does not tile the block");
    }
    cb.codewords.reserve(cb.M);
    while (cb.codewords.size() < cb.M && std::getline(is, line)) {
        if (static_cast<int>(line.size()) != cb.n) {
            throw Error(Errc::parse, "codeword " + std::to_string(cb.codewords.size()) + " has wrong length");
        }
        std::vector<std::uint8_t> bits(line.size());
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] != '0' && line[i] != '1') {
                throw Error(Errc::parse, "codeword characters must be 0 or 1");
            }
            bits[i] = line[i] == '1' ? 1 : 0;
        }
        cb.codewords.push_back(std::move(bits));
    }
    if (cb.codewords.size() != cb.M) {
        throw Error(Errc::parse, "expected " + std::to_string(cb.M) + " codewords");
    }
    return cb;
}

}  // namespace cqc
