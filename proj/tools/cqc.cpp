// Command-line front end for the covert queueing channel library.
//
// Every table starts with a comment block recording the tool version, the
// command, the effective configuration and the seed. Exit codes: 0 success,
// 1 validation failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cqc/cqc.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw UsageError(what);
    }
}

struct Globals {
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
    std::optional<double> tolerance;
};

struct HtildeArgs {
    double gamma_step = 0.01;
    std::vector<int> k{1, 2, 3};
};

struct Capacity2Args {
    std::optional<double> alpha_fixed;
};

struct Capacity3Args {
    std::vector<double> rp{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    int tau_max = cqc::kDefaultTauMax;
    bool itilde = false;
    double gamma_step = 0.01;
    std::vector<int> k{1, 2, 3};
};

struct SimulateArgs {
    int users = 2;
    int n = 60;
    std::size_t messages = 256;
    std::optional<double> log2_messages;
    double delta = cqc::kDefaultDelta;
    double rp = 0.1;
    int tau_max = cqc::kDefaultTauMax;
    std::size_t trials = 1000;
    std::string trace;
    std::string codebook_out;
    std::string codebook_in;
};

struct StabilityArgs {
    std::vector<double> rates{0.45, 0.5};
    std::int64_t horizon = 1'000'000;
    std::int64_t backlog = 0;
};

struct ValidateArgs {
    int tau_max = cqc::kDefaultTauMax;
    std::size_t samples = 500;
};

/// Output sink: stdout or the --out file.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            require(static_cast<bool>(*file_), "cannot open output file " + path);
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

ordered_json globals_json(const Globals& g) {
    ordered_json j;
    j["seed"] = g.seed;
    if (g.tolerance) {
        j["tolerance"] = *g.tolerance;
    }
    return j;
}

std::string config_line(const Globals& g, ordered_json cmd) {
    ordered_json j = globals_json(g);
    for (auto& [key, value] : cmd.items()) {
        j[key] = value;
    }
    return j.dump();
}

int run_htilde(const Globals& g, const HtildeArgs& a, std::ostream& os) {
    require(a.gamma_step > 0.0 && a.gamma_step < 1.0, "gamma-step must lie in (0, 1)");
    const double cells = 1.0 / a.gamma_step;
    require(std::abs(cells - std::round(cells)) < 1e-9, "gamma-step must divide 1");
    require(!a.k.empty(), "k set is empty");
    for (int k : a.k) {
        require(k >= 1, "k values must be positive");
    }
    ordered_json cfg{{"gamma-step", a.gamma_step}, {"k", a.k}};
    cqc::write_csv_preamble(os, "htilde", config_line(g, cfg), g.seed);
    os << "gamma,k,h_tilde\n";
    const auto steps = static_cast<int>(std::llround(cells));
    for (int k : a.k) {
        for (int i = 1; i < steps; ++i) {
            const double gamma = i * a.gamma_step;
            os << cqc::csv_real(gamma) << ',' << k << ',' << cqc::csv_real(cqc::h_tilde(gamma, k).bits_per_slot)
               << '\n';
        }
    }
    return kExitOk;
}

int run_capacity2(const Globals& g, const Capacity2Args& a, std::ostream& os) {
    cqc::Capacity2Options opts;
    if (g.tolerance) {
        require(*g.tolerance > 0.0, "tolerance must be positive");
        opts.tolerance = *g.tolerance;
    }
    if (a.alpha_fixed) {
        require(*a.alpha_fixed >= 0.0 && *a.alpha_fixed <= 1.0, "alpha-fixed must lie in [0, 1]");
        opts.slice.alpha = *a.alpha_fixed;
    }
    ordered_json cfg = ordered_json::object();
    if (a.alpha_fixed) {
        cfg["alpha-fixed"] = *a.alpha_fixed;
    }
    const cqc::CapacityResult2 r = cqc::solve_capacity_2user(opts);
    cqc::write_csv_preamble(os, "capacity2", config_line(g, cfg), g.seed);
    char human[160];
    std::snprintf(human, sizeof human, "# capacity %.4f bits/slot at alpha=%.3f gamma1=%.3f gamma2=%.3f",
                  r.capacity_bits_per_slot, r.alpha, r.gamma1, r.gamma2);
    os << human << '\n';
    os << "capacity,alpha,gamma1,gamma2,constraint_residual\n"
       << cqc::csv_real(r.capacity_bits_per_slot) << ',' << cqc::csv_real(r.alpha) << ',' << cqc::csv_real(r.gamma1)
       << ',' << cqc::csv_real(r.gamma2) << ',' << cqc::csv_real(r.constraint_residual) << '\n';
    return kExitOk;
}

int run_capacity3(const Globals& g, const Capacity3Args& a, std::ostream& os) {
    require(!a.rp.empty(), "r_p grid is empty");
    if (a.itilde) {
        require(a.gamma_step > 0.0 && a.gamma_step < 1.0, "gamma-step must lie in (0, 1)");
        const double cells = 1.0 / a.gamma_step;
        require(std::abs(cells - std::round(cells)) < 1e-9, "gamma-step must divide 1");
        for (int k : a.k) {
            require(k >= 1, "k values must be positive");
        }
        for (double r : a.rp) {
            require(r >= 0.0 && r <= 1.0, "r_p values must lie in [0, 1]");
        }
        ordered_json cfg{{"itilde", true}, {"gamma-step", a.gamma_step}, {"k", a.k}, {"rp", a.rp}};
        cqc::write_csv_preamble(os, "capacity3", config_line(g, cfg), g.seed);
        os << "gamma,k,r_p,i_tilde\n";
        const auto steps = static_cast<int>(std::llround(cells));
        for (double r : a.rp) {
            for (int k : a.k) {
                for (int i = 1; i < steps; ++i) {
                    const double gamma = i * a.gamma_step;
                    os << cqc::csv_real(gamma) << ',' << k << ',' << cqc::csv_real(r) << ','
                       << cqc::csv_real(cqc::i_tilde(gamma, k, r).bits_per_slot) << '\n';
                }
            }
        }
        return kExitOk;
    }
    require(a.tau_max >= 2, "tau-max must be at least 2");
    for (double r : a.rp) {
        require(r >= 0.0 && r < 1.0, "r_p values must lie in [0, 1)");
    }
    cqc::Capacity3Options opts;
    opts.tau_max = a.tau_max;
    if (g.tolerance) {
        require(*g.tolerance > 0.0, "tolerance must be positive");
        opts.tolerance = *g.tolerance;
    }
    ordered_json cfg{{"rp", a.rp}, {"tau-max", a.tau_max}};
    cqc::write_csv_preamble(os, "capacity3", config_line(g, cfg), g.seed);
    os << "r_p,capacity,alpha,gamma1,gamma2,tau_star\n";
    for (double r : a.rp) {
        try {
            const cqc::CapacityResult3 c = cqc::solve_capacity_3user(r, opts);
            os << cqc::csv_real(r) << ',' << cqc::csv_real(c.capacity_bits_per_slot) << ',' << cqc::csv_real(c.alpha)
               << ',' << cqc::csv_real(c.gamma1) << ',' << cqc::csv_real(c.gamma2) << ',' << c.tau_star << '\n';
        } catch (const cqc::Error& e) {
            if (e.code() != cqc::Errc::infeasible) {
                throw;
            }
            os << "# r_p=" << cqc::csv_real(r) << ": " << e.what() << '\n';
        }
    }
    return kExitOk;
}

int run_simulate(const Globals& g, const SimulateArgs& a, std::ostream& os) {
    require(a.users == 2 || a.users == 3, "users must be 2 or 3");
    require(a.n >= 1, "n must be positive");
    require(a.delta >= 0.0 && a.delta < 1.0, "delta must lie in [0, 1)");
    require(a.tau_max >= 2, "tau-max must be at least 2");
    if (a.users == 3) {
        require(a.rp >= 0.0 && a.rp < 1.0, "rp must lie in [0, 1)");
    }
    ordered_json cfg{{"users", a.users}, {"n", a.n}, {"delta", a.delta}, {"trials", a.trials}};
    if (a.users == 3) {
        cfg["rp"] = a.rp;
        cfg["tau-max"] = a.tau_max;
    }

    if (a.log2_messages) {
        require(a.users == 3, "log2-messages (ensemble mode) needs users = 3");
        require(*a.log2_messages >= 0.0, "log2-messages must be nonnegative");
        require(a.trials >= 1, "trials must be positive");
        cfg["log2-messages"] = *a.log2_messages;
        const auto op = cqc::operating_point_3user(a.rp, a.tau_max, a.delta);
        const auto r = cqc::estimate_ensemble_error(op, a.n, *a.log2_messages, a.trials, g.seed);
        cqc::write_csv_preamble(os, "simulate", config_line(g, cfg), g.seed);
        os << "users,n,log2_messages,tau_star,trials,mean_error,std_error,rate,max_backlog,seed\n"
           << a.users << ',' << r.n << ',' << cqc::csv_real(r.log2_messages) << ',' << op.tau_star << ',' << r.trials
           << ',' << cqc::csv_real(r.mean_error) << ',' << cqc::csv_real(r.std_error) << ','
           << cqc::csv_real(r.rate_bits_per_slot) << ',' << r.max_backlog << ',' << r.seed << '\n';
        return kExitOk;
    }

    cqc::Codebook cb{};
    if (!a.codebook_in.empty()) {
        std::ifstream in(a.codebook_in);
        require(static_cast<bool>(in), "cannot open codebook " + a.codebook_in);
        cb = cqc::read_codebook(in);
        cfg["codebook-in"] = a.codebook_in;
    } else {
        require(a.messages >= 1, "messages must be positive");
        cfg["messages"] = a.messages;
        cb = a.users == 2 ? cqc::build_codebook_2user(a.n, a.messages, a.delta, g.seed)
                          : cqc::build_codebook_3user(a.n, a.messages, a.rp, a.tau_max, a.delta, g.seed);
    }
    if (!a.codebook_out.empty()) {
        std::ofstream out(a.codebook_out);
        require(static_cast<bool>(out), "cannot open " + a.codebook_out);
        cqc::write_codebook(out, cb);
        cfg["codebook-out"] = a.codebook_out;
    }
    cqc::ChannelConfig channel;
    if (a.users == 3) {
        channel.background_rate = a.rp;
    }
    const auto r = cqc::run_transmission(cb, channel, a.trials, g.seed);
    if (!a.trace.empty()) {
        cfg["trace"] = a.trace;
        std::ofstream tf(a.trace);
        require(static_cast<bool>(tf), "cannot open " + a.trace);
        cqc::CounterRng rng = cqc::CounterRng(g.seed).split(0);
        const auto message = static_cast<std::size_t>(cqc::uniform_index(rng, cb.M));
        cqc::SchedulerTrace trace;
        (void)cqc::transmit_once(cb, message, channel, r.initial_backlog, rng, &trace);
        cqc::write_csv_preamble(tf, "simulate --trace", config_line(g, cfg), g.seed);
        tf << "# message: " << message << '\n';
        cqc::write_trace_csv(tf, trace);
    }
    cqc::write_csv_preamble(os, "simulate", config_line(g, cfg), g.seed);
    os << "users,n,messages,alpha_slots,tau_star,trials,errors,error_rate,rate,initial_backlog,seed\n"
       << a.users << ',' << cb.n << ',' << cb.M << ',' << cb.alpha_slots << ',' << cb.tau_star << ',' << r.messages_sent
       << ',' << r.errors << ',' << cqc::csv_real(r.empirical_error_rate) << ','
       << cqc::csv_real(r.empirical_rate_bits_per_slot) << ',' << r.initial_backlog << ',' << r.seed << '\n';
    return kExitOk;
}

int run_stability(const Globals& g, const StabilityArgs& a, std::ostream& os) {
    require(a.horizon >= 1, "horizon must be positive");
    require(a.backlog >= 0, "backlog must be nonnegative");
    for (double r : a.rates) {
        require(r >= 0.0 && r <= 1.0, "rates must lie in [0, 1]");
    }
    ordered_json cfg{{"rates", a.rates}, {"horizon", a.horizon}, {"backlog", a.backlog}};
    const auto r = cqc::stability_probe(a.rates, a.horizon, g.seed, a.backlog);
    cqc::write_csv_preamble(os, "stability", config_line(g, cfg), g.seed);
    os << "total_rate,horizon,max_queue,final_queue,second_half_mean_queue,drift_threshold,empirical_drift,"
          "predicted_drift,drift_samples\n"
       << cqc::csv_real(r.total_rate) << ',' << r.horizon << ',' << r.max_queue << ',' << r.final_queue << ','
       << cqc::csv_real(r.second_half_mean_queue) << ',' << cqc::csv_real(r.drift_threshold) << ','
       << cqc::csv_real(r.empirical_drift) << ',' << cqc::csv_real(r.predicted_drift) << ',' << r.drift_samples
       << '\n';
    return kExitOk;
}

int run_validate(const Globals& g, const ValidateArgs& a, std::ostream& os) {
    require(a.tau_max >= 3, "tau-max must be at least 3");
    require(a.samples >= 1, "samples must be positive");
    if (g.tolerance) {
        require(*g.tolerance >= 0.0, "tolerance must be nonnegative");
    }
    auto tol = [&](double fallback) { return g.tolerance ? *g.tolerance : fallback; };
    ordered_json cfg{{"tau-max", a.tau_max}, {"samples", a.samples}};
    const int k_max = a.tau_max;
    std::vector<cqc::CheckResult> checks;
    checks.push_back(cqc::check_dual_formula(k_max, 0.01, tol(1e-9)));
    checks.push_back(cqc::check_symmetry(10'000, g.seed, tol(1e-10)));
    checks.push_back(cqc::check_pair_concavity(10'000, g.seed + 1, tol(1e-9)));
    checks.push_back(cqc::check_kl_projection(20, 1000, g.seed + 2, tol(1e-6)));
    checks.push_back(cqc::check_tilt_monotone(k_max, tol(0.0)));
    checks.push_back(cqc::check_noiseless_reduction(k_max, 0.01, tol(1e-6)));
    checks.push_back(cqc::check_data_processing(a.samples, g.seed + 3, k_max, tol(1e-9)));
    // Reported for inspection only; I-tilde is not monotone in r_p in general.
    checks.push_back(cqc::check_monotone_degradation(k_max, 0.05, tol(1e-6)));
    const std::size_t informational = checks.size() - 1;
    checks.push_back(cqc::check_itilde_first_argument(a.samples, g.seed + 4, k_max, tol(1e-9)));
    checks.push_back(cqc::check_i_concavity(a.tau_max, a.samples, g.seed + 5, tol(1e-6)));
    cqc::write_csv_preamble(os, "validate", config_line(g, cfg), g.seed);
    os << "check,worst_margin,tolerance,evaluated,passed,gating,where\n";
    bool all = true;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto& c = checks[i];
        const bool gating = i != informational;
        all = all && (c.passed || !gating);
        os << cqc::csv_field(c.name) << ',' << cqc::csv_real(c.worst_margin) << ',' << cqc::csv_real(c.tolerance) << ','
           << c.evaluated << ',' << (c.passed ? "true" : "false") << ',' << (gating ? "true" : "false") << ','
           << cqc::csv_field(c.where) << '\n';
    }
    return all ? kExitOk : kExitValidation;
}

/// Appends "--key value..." for config entries the command line left unset.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& s = args[i];
        if (s.rfind("--", 0) == 0) {
            const auto eq = s.find('=');
            const std::string key = s.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
            given.insert(key);
            if (key == "config") {
                path = eq == std::string::npos ? (i + 1 < args.size() ? args[i + 1] : "") : s.substr(eq + 1);
            }
        }
    }
    if (path.empty()) {
        return args;
    }
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open config " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const ordered_json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    require(j.is_object(), "config must be a JSON object");
    auto scalar = [](const ordered_json& v) {
        if (v.is_string()) {
            return v.get<std::string>();
        }
        if (v.is_boolean()) {
            return std::string(v.get<bool>() ? "true" : "false");
        }
        return v.dump();
    };
    for (const auto& [key, value] : j.items()) {
        if (given.count(key) || key == "config") {
            continue;
        }
        if (value.is_boolean()) {
            if (value.get<bool>()) {
                args.push_back("--" + key);
            }
            continue;
        }
        args.push_back("--" + key);
        if (value.is_array()) {
            for (const auto& v : value) {
                args.push_back(scalar(v));
            }
        } else {
            args.push_back(scalar(value));
        }
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covert queueing channel laboratory", "cqc"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "64-bit seed")->capture_default_str();
    app.add_option("--out", g.out, "write the table here instead of stdout");
    app.add_option("--config", g.config, "JSON file mirroring the flags; flags win");
    app.add_option("--tolerance", g.tolerance, "solver or validation tolerance");

    HtildeArgs ht;
    auto* cmd_ht = app.add_subcommand("htilde", "tabulate H-tilde over a gamma grid");
    cmd_ht->add_option("--gamma-step", ht.gamma_step)->capture_default_str();
    cmd_ht->add_option("--k", ht.k)->capture_default_str();

    Capacity2Args c2;
    auto* cmd_c2 = app.add_subcommand("capacity2", "two-user capacity");
    cmd_c2->add_option("--alpha-fixed", c2.alpha_fixed, "restrict to one alpha");

    Capacity3Args c3;
    auto* cmd_c3 = app.add_subcommand("capacity3", "three-user capacity over an r_p grid");
    cmd_c3->add_option("--rp", c3.rp)->capture_default_str();
    cmd_c3->add_option("--tau-max", c3.tau_max)->capture_default_str();
    cmd_c3->add_flag("--itilde", c3.itilde, "emit the I-tilde sweep instead");
    cmd_c3->add_option("--gamma-step", c3.gamma_step)->capture_default_str();
    cmd_c3->add_option("--k", c3.k)->capture_default_str();

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "end-to-end transmission through the queue");
    cmd_sim->add_option("--users", sim.users)->capture_default_str();
    cmd_sim->add_option("--n", sim.n, "block length in slots")->capture_default_str();
    cmd_sim->add_option("--messages", sim.messages)->capture_default_str();
    cmd_sim->add_option("--log2-messages", sim.log2_messages, "ensemble estimate for 2^x messages (users = 3)");
    cmd_sim->add_option("--delta", sim.delta)->capture_default_str();
    cmd_sim->add_option("--rp", sim.rp, "background rate (users = 3)")->capture_default_str();
    cmd_sim->add_option("--tau-max", sim.tau_max)->capture_default_str();
    cmd_sim->add_option("--trials", sim.trials)->capture_default_str();
    cmd_sim->add_option("--trace", sim.trace, "per-slot CSV of one block");
    cmd_sim->add_option("--codebook-out", sim.codebook_out);
    cmd_sim->add_option("--codebook-in", sim.codebook_in);

    StabilityArgs st;
    auto* cmd_st = app.add_subcommand("stability", "queue drift under Bernoulli arrivals");
    cmd_st->add_option("--rates", st.rates)->capture_default_str();
    cmd_st->add_option("--horizon", st.horizon)->capture_default_str();
    cmd_st->add_option("--backlog", st.backlog)->capture_default_str();

    ValidateArgs va;
    auto* cmd_va = app.add_subcommand("validate", "property sweeps with worst margins");
    cmd_va->add_option("--tau-max", va.tau_max)->capture_default_str();
    cmd_va->add_option("--samples", va.samples)->capture_default_str();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config(std::move(args));
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "cqc: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        Sink sink(g.out);
        std::ostream& os = sink.os();
        if (*cmd_ht) {
            return run_htilde(g, ht, os);
        }
        if (*cmd_c2) {
            return run_capacity2(g, c2, os);
        }
        if (*cmd_c3) {
            return run_capacity3(g, c3, os);
        }
        if (*cmd_sim) {
            return run_simulate(g, sim, os);
        }
        if (*cmd_st) {
            return run_stability(g, st, os);
        }
        if (*cmd_va) {
            return run_validate(g, va, os);
        }
    } catch (const UsageError& e) {
        std::cerr << "cqc: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cqc::Error& e) {
        std::cerr << "cqc: " << e.what() << '\n';
        const bool usage = e.code() == cqc::Errc::domain || e.code() == cqc::Errc::box_violation ||
                           e.code() == cqc::Errc::parse || e.code() == cqc::Errc::endpoint;
        return usage ? kExitUsage : kExitValidation;
    }
    return kExitUsage;
}
