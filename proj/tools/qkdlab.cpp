// Command-line front end: protocol simulation, finite-key bound tables,
// asymptotic curves, Monte Carlo code experiments and the numerical
// verification campaigns, all emitting reproducible CSV.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qkd/bounds.hpp"
#include "qkd/coding.hpp"
#include "qkd/csv.hpp"
#include "qkd/protocol.hpp"
#include "qkd/quantum.hpp"
#include "qkd/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitVerifyFailed = 3;

struct Options {
    std::string variant = "bb84";
    std::uint64_t n = 0, nz = 0, nx = 0, tz = 0, tx = 0;
    double p = 0.5;
    double pa = 0.0, paz = 0.0, pax = 0.0;
    double eps_sec = -1.0, eps_rel = -1.0;
    double r_frac = -1.0, m_frac = -1.0;
    std::uint64_t r = 0, m = 0;
    bool have_r = false, have_m = false;
    double flip_z = 0.0, flip_x = 0.0;
    std::uint64_t runs = 0, trials = 0, cases = 0, steps = 101;
    std::uint64_t seed = 0;
    std::uint64_t t = 0;
    std::string estimator = "failure";
    std::string ell;
    std::string weight_mode = "exact";
    std::string mode = "real";
    std::string suite = "quantum";
    std::string out;
    std::string transcripts;
    std::string n_list;
    std::string config;  // handled before parsing; registered for --help
};

void write_output(const std::string& path, const std::string& payload) {
    if (path.empty()) {
        std::fwrite(payload.data(), 1, payload.size(), stdout);
        return;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    std::fwrite(payload.data(), 1, payload.size(), f);
    std::fclose(f);
}

qkd::ProtocolParams build_params(const Options& o, bool with_eps) {
    const auto variant = qkd::variant_from_name(o.variant);
    if (!variant) throw std::invalid_argument("unknown variant: " + o.variant);
    const std::size_t n =
        *variant == qkd::Variant::ModifiedEfficient ? o.tz + o.tx : o.n;
    if (n == 0) throw std::invalid_argument("n (or tz+tx) must be positive");
    std::size_t r = o.have_r ? o.r
                             : static_cast<std::size_t>(std::llround(
                                   o.r_frac * static_cast<double>(n)));
    std::size_t m = o.have_m ? o.m
                             : static_cast<std::size_t>(std::llround(
                                   o.m_frac * static_cast<double>(n)));
    if (!o.have_r && o.r_frac < 0)
        throw std::invalid_argument("--r or --r-frac required");
    if (!o.have_m && o.m_frac < 0)
        throw std::invalid_argument("--m or --m-frac required");
    std::optional<double> es, er;
    if (with_eps) {
        if (o.eps_sec < 0 || o.eps_rel < 0)
            throw std::invalid_argument("--eps-sec and --eps-rel required");
        es = o.eps_sec;
        er = o.eps_rel;
    }
    switch (*variant) {
        case qkd::Variant::Bb84InfoZ:
            return qkd::ProtocolParams::bb84_info_z(n, o.nz, o.nx, r, m, o.paz,
                                                    o.pax, es, er);
        case qkd::Variant::Bb84:
            return qkd::ProtocolParams::bb84(n, r, m, o.pa, es, er);
        case qkd::Variant::Efficient:
            return qkd::ProtocolParams::efficient(n, o.nz, o.nx, o.p, r, m,
                                                  o.pa, es, er);
        case qkd::Variant::ModifiedEfficient:
            return qkd::ProtocolParams::modified_efficient(o.tz, o.tx, o.nz,
                                                           o.nx, r, m, o.pa,
                                                           es, er);
    }
    throw std::logic_error("unreachable");
}

std::string join_terms(const std::vector<qkd::BoundTerm>& terms) {
    std::string s;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) s += '|';
        s += terms[i].label + ':' + qkd::csv_num(terms[i].value);
    }
    return s;
}

int run_bound(const Options& o) {
    using namespace qkd;
    std::string payload;
    if (!o.n_list.empty()) {
        // Rate table over a ';'-separated list of n values.
        payload = "n,p_a,eps_sec,eps_rel,r_over_n,m_over_n,total_bound,key_rate\n";
        std::size_t start = 0;
        while (start < o.n_list.size()) {
            std::size_t end = o.n_list.find(';', start);
            if (end == std::string::npos) end = o.n_list.size();
            Options oi = o;
            oi.n = std::stoull(o.n_list.substr(start, end - start));
            const ProtocolParams q = build_params(oi, true);
            const SecurityBound b = compute_bound(q);
            const double pa =
                q.variant == Variant::Bb84InfoZ ? q.p_az : q.p_a;
            payload += csv_row({csv_num(q.n), csv_num(pa), csv_num(*q.eps_sec),
                                csv_num(*q.eps_rel),
                                csv_num(double(q.r) / double(q.n)),
                                csv_num(double(q.m) / double(q.n)),
                                csv_num(b.total), csv_num(b.key_rate)});
            start = end + 1;
        }
        write_output(o.out, payload);
        return kExitOk;
    }
    const ProtocolParams q = build_params(o, true);
    const SecurityBound b = compute_bound(q);
    payload =
        "variant,N,n,n_z,n_x,t_z,t_x,p,p_a,p_az,p_ax,eps_sec,eps_rel,r,m,"
        "reliability_terms,secrecy_terms,total,log2_total,key_rate\n";
    payload += csv_row(
        {variant_name(q.variant), csv_num(q.N), csv_num(q.n), csv_num(q.n_z),
         csv_num(q.n_x), csv_num(q.t_z), csv_num(q.t_x), csv_num(q.p),
         csv_num(q.p_a), csv_num(q.p_az), csv_num(q.p_ax), csv_num(*q.eps_sec),
         csv_num(*q.eps_rel), csv_num(q.r), csv_num(q.m),
         join_terms(b.reliability_terms),
         join_terms(b.secrecy_terms_under_radical), csv_num(b.total),
         csv_num(b.log2_total), csv_num(b.key_rate)});
    write_output(o.out, payload);
    return kExitOk;
}

int run_curve(const Options& o) {
    using namespace qkd;
    if (o.variant != "bb84-info-z")
        throw std::invalid_argument("curve: only bb84-info-z traces a curve");
    if (o.steps < 2) throw std::invalid_argument("curve: steps >= 2");
    std::string payload = "p_az,p_ax\n";
    for (std::uint64_t i = 0; i < o.steps; ++i) {
        const double paz =
            0.5 * static_cast<double>(i) / static_cast<double>(o.steps - 1);
        const double pax = h2_inverse(1.0 - h2(paz), 1e-13);
        payload += csv_row({csv_num(paz), csv_num(pax)});
    }
    write_output(o.out, payload);
    return kExitOk;
}

int run_mc_code(const Options& o) {
    using namespace qkd;
    Rng rng(o.seed);
    McEstimate est;
    if (o.estimator == "failure") {
        const auto mode = o.weight_mode == "uniform" ? ErrorWeightMode::UniformUpTo
                                                     : ErrorWeightMode::Exact;
        est = mc_decoding_failure_rate(o.n, o.r /*k*/, o.t, o.trials, rng, mode);
    } else if (o.estimator == "coset-word") {
        BitString ell = o.ell.empty() ? BitString(o.n)
                                      : BitString::from_string(o.ell);
        est = mc_low_weight_coset_word(ell, o.n, o.r /*k*/, o.t, o.trials, rng);
    } else {
        throw std::invalid_argument("mc-code: estimator must be failure|coset-word");
    }
    std::string payload = "n,k,t,trials,failures,estimate,ci_low,ci_high,bound\n";
    payload += csv_row({csv_num(est.n), csv_num(est.k), csv_num(est.t),
                        csv_num(est.trials), csv_num(est.failures),
                        csv_num(est.ci.estimate), csv_num(est.ci.low),
                        csv_num(est.ci.high), csv_num(est.bound)});
    write_output(o.out, payload);
    // Definite violation only: the whole interval above the bound.
    return est.ci.low > est.bound ? kExitVerifyFailed : kExitOk;
}

int run_simulate(const Options& o) {
    using namespace qkd;
    const ProtocolParams q = build_params(o, false);
    const ChannelModel ch =
        (o.flip_z == 0.0 && o.flip_x == 0.0)
            ? ChannelModel::noiseless()
            : ChannelModel::independent_flip(o.flip_z, o.flip_x);
    const RunMode mode = o.mode == "inverted" ? RunMode::InvertedInfoBasis
                                              : RunMode::Real;
    Rng rng(o.seed);
    std::string tlines;
    ExperimentSummary sum;
    if (!o.transcripts.empty()) {
        // Re-run loop locally so per-run transcripts can be dumped.
        sum.runs = o.runs;
        for (std::uint64_t it = 0; it < o.runs; ++it) {
            const ProtocolTranscript t = run_protocol(q, ch, mode, rng);
            tlines += transcript_to_line(t) + "\n";
            if (t.aborted) {
                ++sum.aborts;
            } else {
                ++sum.passed;
                if (!t.keys_match()) ++sum.reconciliation_failures;
            }
        }
        sum.abort_rate = wilson_interval(sum.aborts, sum.runs);
        sum.failure_rate = wilson_interval(sum.reconciliation_failures, sum.runs);
        write_output(o.transcripts, tlines);
    } else {
        sum = keyrate_experiment(q, ch, o.runs, rng, mode);
    }
    std::string payload =
        "variant,mode,N,n,n_z,n_x,t_z,t_x,r,m,p_a,p_az,p_ax,flip_z,flip_x,"
        "runs,aborts,abort_rate,abort_ci_low,abort_ci_high,passed,failures,"
        "failure_rate,failure_ci_low,failure_ci_high,"
        "mean_info_err,mean_test_z_err,mean_test_x_err\n";
    payload += csv_row(
        {variant_name(q.variant), o.mode, csv_num(q.N), csv_num(q.n),
         csv_num(q.n_z), csv_num(q.n_x), csv_num(q.t_z), csv_num(q.t_x),
         csv_num(q.r), csv_num(q.m), csv_num(q.p_a), csv_num(q.p_az),
         csv_num(q.p_ax), csv_num(o.flip_z), csv_num(o.flip_x),
         csv_num(sum.runs), csv_num(sum.aborts), csv_num(sum.abort_rate.estimate),
         csv_num(sum.abort_rate.low), csv_num(sum.abort_rate.high),
         csv_num(sum.passed), csv_num(sum.reconciliation_failures),
         csv_num(sum.failure_rate.estimate), csv_num(sum.failure_rate.low),
         csv_num(sum.failure_rate.high), csv_num(sum.mean_info_error_rate),
         csv_num(sum.mean_test_z_error_rate),
         csv_num(sum.mean_test_x_error_rate)});
    write_output(o.out, payload);
    return kExitOk;
}

int run_verify(const Options& o) {
    using namespace qkd;
    Rng rng(o.seed);
    std::string payload;
    bool all_hold = true;
    if (o.suite == "quantum") {
        payload = "case_id,N,n,r,m,t,lhs,rhs,margin,holds\n";
        const int N = 3;
        const std::size_t n = 2;
        for (std::uint64_t cs = 0; cs < o.cases; ++cs) {
            AttackSpec atk = AttackSpec::random(N, 1 << N, rng);
            const std::size_t r = rng.next_below(n);  // r + m <= n with m = 1
            BitString b = BitString::random(N, rng);
            BitString s(N);
            {
                std::vector<std::size_t> pool(N);
                std::iota(pool.begin(), pool.end(), 0);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j =
                        i + static_cast<std::size_t>(rng.next_below(N - i));
                    std::swap(pool[i], pool[j]);
                    s.set(pool[i], true);
                }
            }
            BitString i_T = BitString::random(N - n, rng);
            BitString j_T = BitString::random(N - n, rng);
            BitString xi = BitString::random(r, rng);
            const std::size_t t = rng.next_below(n / 2 + 1);
            const auto rep = verify_info_disturbance(atk, b, s, i_T, j_T, xi, t);
            bool ok = rep.holds && rep.skipped_branches == 0 &&
                      rep.lemma_dsq_error <= 1e-10;
            const auto sym = symmetrize(atk);
            const CodeDraws draws = enumerate_stacked_full_rank(r, 1, n);
            const auto checks = check_symmetrization(
                atk, sym, b, s, i_T, j_T, draws.pairs[0].first,
                draws.pairs[0].second);
            ok = ok && checks.max() <= 1e-10;
            all_hold = all_hold && ok;
            payload += csv_row({csv_num(cs), csv_num(std::uint64_t(N)),
                                csv_num(n), csv_num(r), csv_num(std::size_t(1)),
                                csv_num(t), csv_num(rep.lhs), csv_num(rep.rhs),
                                csv_num(rep.margin),
                                ok ? "true" : "false"});
        }
    } else if (o.suite == "composable") {
        payload = "case_id,N,n,r,m,t,lhs,rhs,margin,holds\n";
        TinyParams tiny;  // BB84 at N = 2, n = 1, r = 0, m = 1
        tiny.p_a = 0.5;
        for (std::uint64_t cs = 0; cs < o.cases; ++cs) {
            AttackSpec atk = AttackSpec::random(2, 4, rng);
            const auto rep = verify_composable_bound(atk, tiny);
            all_hold = all_hold && rep.holds;
            payload += csv_row(
                {csv_num(cs), csv_num(tiny.N), csv_num(tiny.n), csv_num(tiny.r),
                 csv_num(tiny.m), csv_num(rep.best_t), csv_num(rep.lhs),
                 csv_num(rep.rhs), csv_num(rep.margin),
                 rep.holds ? "true" : "false"});
        }
    } else if (o.suite == "coding") {
        payload = "case_id,n,k,holds\n";
        for (std::uint64_t cs = 0; cs < o.cases; ++cs) {
            const std::size_t n = 3 + rng.next_below(8);  // 3..10
            const std::size_t k = 1 + rng.next_below(std::min<std::size_t>(n, 5));
            LinearCode code = random_code(n, k, rng);
            const bool ok = verify_decoder_equivalence(code, rng);
            all_hold = all_hold && ok;
            payload += csv_row({csv_num(cs), csv_num(n), csv_num(k),
                                ok ? "true" : "false"});
        }
    } else if (o.suite == "hoeffding") {
        payload = "case_id,n,n_prime,p,eps,estimate,ci_high,bound,holds\n";
        const std::uint64_t trials = o.trials ? o.trials : 20000;
        std::uint64_t cs = 0;
        for (std::size_t n : {20, 40})
            for (std::size_t np : {20, 40})
                for (double p : {0.1, 0.25})
                    if (cs < o.cases) {
                        const double eps = 0.2;
                        const auto est =
                            mc_partition_tail(n, np, p, eps, trials, rng);
                        const bool ok = est.max_estimate <=
                                        est.bound + (est.ci_at_max.high -
                                                     est.ci_at_max.estimate);
                        all_hold = all_hold && ok;
                        payload += csv_row(
                            {csv_num(cs), csv_num(n), csv_num(np), csv_num(p),
                             csv_num(eps), csv_num(est.max_estimate),
                             csv_num(est.ci_at_max.high), csv_num(est.bound),
                             ok ? "true" : "false"});
                        ++cs;
                    }
    } else {
        throw std::invalid_argument("verify: unknown suite " + o.suite);
    }
    write_output(o.out, payload);
    return all_hold ? kExitOk : kExitVerifyFailed;
}

// Flat JSON config: keys are the long flag names; command-line flags win.
std::vector<std::string> inject_config(const std::vector<std::string>& args) {
    std::string config_path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (config_path.empty()) return rest;
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot read config file: " + config_path);
    nlohmann::json j;
    in >> j;
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
    std::vector<std::string> injected;
    if (!rest.empty()) injected.push_back(rest.front());  // subcommand first
    for (const auto& [key, value] : j.items()) {
        injected.push_back("--" + key);
        if (value.is_string()) {
            injected.push_back(value.get<std::string>());
        } else if (value.is_boolean()) {
            if (!value.get<bool>()) injected.pop_back();
        } else {
            injected.push_back(value.dump());
        }
    }
    for (std::size_t i = 1; i < rest.size(); ++i) injected.push_back(rest[i]);
    return injected;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized-BB84 protocol engine and finite-key calculator"};
    app.require_subcommand(1);
    Options o;

    auto last = [](CLI::Option* opt) {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        return opt;
    };
    auto add_common = [&](CLI::App* cmd, bool with_eps, bool with_seed) {
        last(cmd->add_option("--variant", o.variant));
        last(cmd->add_option("--n", o.n));
        last(cmd->add_option("--nz", o.nz));
        last(cmd->add_option("--nx", o.nx));
        last(cmd->add_option("--tz", o.tz));
        last(cmd->add_option("--tx", o.tx));
        last(cmd->add_option("--p", o.p));
        last(cmd->add_option("--pa", o.pa));
        last(cmd->add_option("--paz", o.paz));
        last(cmd->add_option("--pax", o.pax));
        last(cmd->add_option("--r-frac", o.r_frac));
        last(cmd->add_option("--m-frac", o.m_frac));
        last(cmd->add_option("--r", o.r))->each([&](const std::string&) { o.have_r = true; });
        last(cmd->add_option("--m", o.m))->each([&](const std::string&) { o.have_m = true; });
        if (with_eps) {
            last(cmd->add_option("--eps-sec", o.eps_sec));
            last(cmd->add_option("--eps-rel", o.eps_rel));
        }
        if (with_seed) last(cmd->add_option("--seed", o.seed))->required();
        last(cmd->add_option("--out", o.out));
        last(cmd->add_option("--config", o.config,
                             "flat JSON file with long-flag keys; flags win"));
    };

    CLI::App* bound = app.add_subcommand("bound", "finite-key security bound");
    add_common(bound, true, false);
    last(bound->add_option("--n-list", o.n_list));

    CLI::App* curve = app.add_subcommand("curve", "asymptotic threshold curve");
    last(curve->add_option("--variant", o.variant));
    last(curve->add_option("--steps", o.steps));
    last(curve->add_option("--out", o.out));
    last(curve->add_option("--config", o.config));

    CLI::App* sim = app.add_subcommand("simulate", "protocol runs over a channel");
    add_common(sim, false, true);
    last(sim->add_option("--flip-z", o.flip_z));
    last(sim->add_option("--flip-x", o.flip_x));
    last(sim->add_option("--runs", o.runs))->required();
    last(sim->add_option("--mode", o.mode));
    last(sim->add_option("--transcripts", o.transcripts));

    CLI::App* mc = app.add_subcommand("mc-code", "random-code Monte Carlo estimators");
    last(mc->add_option("--estimator", o.estimator));
    last(mc->add_option("--n", o.n))->required();
    last(mc->add_option("--k", o.r))->required();  // reuses the r slot
    last(mc->add_option("--t", o.t))->required();
    last(mc->add_option("--trials", o.trials))->required();
    last(mc->add_option("--seed", o.seed))->required();
    last(mc->add_option("--ell", o.ell));
    last(mc->add_option("--weight-mode", o.weight_mode));
    last(mc->add_option("--out", o.out));
    last(mc->add_option("--config", o.config));

    CLI::App* verify = app.add_subcommand("verify", "numerical verification campaigns");
    last(verify->add_option("--suite", o.suite));
    last(verify->add_option("--seed", o.seed))->required();
    last(verify->add_option("--cases", o.cases))->required();
    last(verify->add_option("--trials", o.trials));
    last(verify->add_option("--out", o.out));
    last(verify->add_option("--config", o.config));

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = inject_config(args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    std::reverse(args.begin(), args.end());  // CLI11 vector parse convention
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? kExitOk : kExitUsage;
    }

    try {
        if (bound->parsed()) return run_bound(o);
        if (curve->parsed()) return run_curve(o);
        if (sim->parsed()) return run_simulate(o);
        if (mc->parsed()) return run_mc_code(o);
        if (verify->parsed()) return run_verify(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
