#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/bounds.hpp"
#include "qkd/coding.hpp"
#include "qkd/gf2.hpp"
#include "qkd/rng.hpp"
#include "qkd/stats.hpp"

namespace qkd {

// Basis / partition strings for one run. s_j = 1 marks an INFO bit,
// b_j = 1 an x-basis qubit; the index sets are derived views.
struct BasisPartition {
    BitString b;  // length N
    BitString s;  // length N, weight n
    std::vector<std::size_t> info, test;
    std::vector<std::size_t> info_z, info_x, test_z, test_x;

    static BasisPartition from_strings(BitString b_in, BitString s_in) {
        BasisPartition p;
        p.b = std::move(b_in);
        p.s = std::move(s_in);
        if (p.b.size() != p.s.size())
            throw std::invalid_argument("BasisPartition: length mismatch");
        for (std::size_t j = 0; j < p.s.size(); ++j) {
            const bool x_basis = p.b.get(j);
            if (p.s.get(j)) {
                p.info.push_back(j);
                (x_basis ? p.info_x : p.info_z).push_back(j);
            } else {
                p.test.push_back(j);
                (x_basis ? p.test_x : p.test_z).push_back(j);
            }
        }
        return p;
    }
};

enum class ChannelKind { Noiseless, IndependentFlip };

// Classical stand-in for the adversary/noise: independent flips with a
// per-basis probability. The general joint attack lives in the quantum
// oracle at tiny N.
struct ChannelModel {
    ChannelKind kind = ChannelKind::Noiseless;
    double flip_z = 0.0;
    double flip_x = 0.0;

    static ChannelModel noiseless() { return {}; }
    static ChannelModel independent_flip(double fz, double fx) {
        if (fz < 0 || fz > 1 || fx < 0 || fx > 1)
            throw std::invalid_argument("ChannelModel: probabilities in [0,1]");
        return {ChannelKind::IndependentFlip, fz, fx};
    }
};

enum class RunMode { Real, InvertedInfoBasis };

namespace detail {

// First `take` elements of a uniform permutation of `pool` (partial
// Fisher-Yates); pool is consumed.
inline std::vector<std::size_t> draw_subset(std::vector<std::size_t>& pool,
                                            std::size_t take, Rng& rng) {
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> out(pool.begin(), pool.begin() + take);
    pool.erase(pool.begin(), pool.begin() + take);
    return out;
}

}  // namespace detail

// Draws (b, s) from the variant's distribution.
inline BasisPartition sample_basis_partition(const ProtocolParams& q,
                                             Rng& rng) {
    const std::size_t N = q.N;
    BitString b(N), s(N);
    switch (q.variant) {
        case Variant::Bb84InfoZ: {
            // Uniform over pairs with |b| = n_x, |s| = n, s AND b = 0.
            std::vector<std::size_t> pool(N);
            std::iota(pool.begin(), pool.end(), 0);
            for (auto j : detail::draw_subset(pool, q.n_x, rng)) b.set(j, true);
            for (auto j : detail::draw_subset(pool, q.n, rng)) s.set(j, true);
            break;
        }
        case Variant::Bb84: {
            b = BitString::random(N, rng);
            std::vector<std::size_t> pool(N);
            std::iota(pool.begin(), pool.end(), 0);
            for (auto j : detail::draw_subset(pool, q.n, rng)) s.set(j, true);
            break;
        }
        case Variant::Efficient: {
            // Per-bit Bernoulli b (z with probability p), redrawn while the
            // TEST quotas cannot be met; this realizes Pr(b) = Pr_0(b)/N_p.
            while (true) {
                b = BitString(N);
                for (std::size_t j = 0; j < N; ++j)
                    if (!rng.bernoulli(q.p)) b.set(j, true);
                const std::size_t ones = b.weight();
                if (ones >= q.n_x && N - ones >= q.n_z) break;
            }
            std::vector<std::size_t> zpos, xpos;
            for (std::size_t j = 0; j < N; ++j)
                (b.get(j) ? xpos : zpos).push_back(j);
            // s uniform over S_b: n_x TEST bits among the x qubits, n_z
            // among the z qubits, the rest INFO.
            s = ~BitString(N);
            for (auto j : detail::draw_subset(xpos, q.n_x, rng)) s.set(j, false);
            for (auto j : detail::draw_subset(zpos, q.n_z, rng)) s.set(j, false);
            break;
        }
        case Variant::ModifiedEfficient: {
            std::vector<std::size_t> pool(N);
            std::iota(pool.begin(), pool.end(), 0);
            for (auto j : detail::draw_subset(pool, q.t_z, rng)) s.set(j, true);
            for (auto j : detail::draw_subset(pool, q.t_x, rng)) {
                s.set(j, true);
                b.set(j, true);
            }
            detail::draw_subset(pool, q.n_z, rng);  // TEST-Z: s = b = 0
            for (auto j : pool) b.set(j, true);     // remaining n_x: TEST-X
            break;
        }
    }
    return BasisPartition::from_strings(std::move(b), std::move(s));
}

// 1 iff every per-population TEST error count is within its threshold.
inline int testing_function(Variant variant, const BitString& c_T,
                            const BitString& b_T, const BitString& s,
                            const ProtocolParams& q) {
    if (c_T.size() != b_T.size() || c_T.size() != s.size() - s.weight())
        throw std::invalid_argument("testing_function: length mismatch");
    std::size_t err_z = 0, err_x = 0;
    for (std::size_t j = 0; j < c_T.size(); ++j)
        if (c_T.get(j)) ++(b_T.get(j) ? err_x : err_z);
    switch (variant) {
        case Variant::Bb84:
            return static_cast<double>(err_z + err_x) <=
                           q.p_a * static_cast<double>(c_T.size()) + 1e-12
                       ? 1
                       : 0;
        case Variant::Bb84InfoZ:
            return (static_cast<double>(err_z) <= q.p_az * q.n_z + 1e-12 &&
                    static_cast<double>(err_x) <= q.p_ax * q.n_x + 1e-12)
                       ? 1
                       : 0;
        case Variant::Efficient:
        case Variant::ModifiedEfficient:
            return (static_cast<double>(err_z) <= q.p_a * q.n_z + 1e-12 &&
                    static_cast<double>(err_x) <= q.p_a * q.n_x + 1e-12)
                       ? 1
                       : 0;
    }
    return 0;
}

struct ProtocolTranscript {
    Variant variant = Variant::Bb84;
    RunMode mode = RunMode::Real;
    BitString b, s, b_used;
    BitString i, j, c;
    BitString i_T, j_T;  // published TEST values
    BitString xi;        // syndrome (empty when aborted)
    BitMatrix P_C, P_K;
    bool test_passed = false;
    bool aborted = false;
    BitString k;                    // Alice's key (empty when aborted)
    std::optional<BitString> k_B;   // Bob's key; nullopt = decode failed
    bool exact_decode = true;       // false when the weight-cap surrogate ran

    bool keys_match() const {
        return test_passed && k_B.has_value() && *k_B == k;
    }
};

// Exhaustive decoding is exponential in k = n - r; above this cap the
// engine falls back to a weight-cap surrogate (see run_protocol).
inline constexpr std::size_t kExactDecodeCap = 22;

namespace detail {

// Largest w <= n/2 with 2^{n [H2(w/n) - r/n]} <= 2^-64, i.e. a weight up
// to which maximum-likelihood decoding fails with negligible probability.
inline std::size_t surrogate_weight_cap(std::size_t n, std::size_t r) {
    std::size_t best = 0;
    bool any = false;
    for (std::size_t w = 0; 2 * w <= n; ++w) {
        const long double expo =
            static_cast<long double>(n) *
            (h2l(static_cast<long double>(w) / n) -
             static_cast<long double>(r) / n);
        if (expo <= -64.0L) {
            best = w;
            any = true;
        } else {
            break;  // exponent is increasing in w on [0, n/2]
        }
    }
    return any ? best : 0;
}

}  // namespace detail

// One full protocol run. In InvertedInfoBasis mode the INFO bits are sent
// and measured in the conjugate basis (b_used = b XOR s) while everything
// else, including the test decision, proceeds as in the real protocol.
inline ProtocolTranscript run_protocol(const ProtocolParams& q,
                                       const ChannelModel& channel,
                                       RunMode mode, Rng& rng) {
    ProtocolTranscript t;
    t.variant = q.variant;
    t.mode = mode;

    BasisPartition part = sample_basis_partition(q, rng);
    t.b = part.b;
    t.s = part.s;
    t.b_used = mode == RunMode::Real ? part.b : part.b ^ part.s;

    t.i = BitString::random(q.N, rng);
    auto [pc, pk] = random_stacked_full_rank(q.r, q.m, q.n, rng);
    t.P_C = std::move(pc);
    t.P_K = std::move(pk);

    t.j = t.i;
    if (channel.kind == ChannelKind::IndependentFlip) {
        for (std::size_t pos = 0; pos < q.N; ++pos) {
            const double fp = t.b_used.get(pos) ? channel.flip_x : channel.flip_z;
            if (fp > 0.0 && rng.bernoulli(fp)) t.j.set(pos, !t.j.get(pos));
        }
    }
    t.c = t.i ^ t.j;

    t.i_T = t.i.select(part.test);
    t.j_T = t.j.select(part.test);
    const BitString c_T = t.i_T ^ t.j_T;
    const BitString b_T = part.b.select(part.test);
    t.test_passed = testing_function(q.variant, c_T, b_T, part.s, q) == 1;
    t.aborted = !t.test_passed;
    if (t.aborted) return t;

    const BitString i_I = t.i.select(part.info);
    const BitString j_I = t.j.select(part.info);
    t.xi = mat_vec(t.P_C, i_I);
    t.k = mat_vec(t.P_K, i_I);

    if (q.n - q.r <= kExactDecodeCap) {
        LinearCode code(t.P_C);
        const DecodeOutcome out = coset_decode(code, t.xi, j_I);
        if (out.decoded()) t.k_B = mat_vec(t.P_K, out.word);
    } else {
        // Surrogate: within the weight cap, the nearest-coset-word decoder
        // returns i_I except with probability < 2^-64; above it the run is
        // counted as a reconciliation failure.
        t.exact_decode = false;
        const BitString c_I = i_I ^ j_I;
        if (c_I.weight() <= detail::surrogate_weight_cap(q.n, q.r)) t.k_B = t.k;
    }
    return t;
}

struct ExperimentSummary {
    std::uint64_t runs = 0;
    std::uint64_t aborts = 0;
    Interval abort_rate;
    std::uint64_t passed = 0;
    std::uint64_t reconciliation_failures = 0;  // k != k^B among passed runs
    Interval failure_rate;                      // failures / runs
    Interval failure_rate_given_pass;           // failures / passed
    double mean_info_error_rate = 0.0;
    double mean_test_z_error_rate = 0.0;
    double mean_test_x_error_rate = 0.0;
    double mean_test_error_count = 0.0;
    double var_test_error_count = 0.0;
};

// Aggregates run_protocol outcomes. Reconciliation failures are counted
// only on passed tests.
inline ExperimentSummary keyrate_experiment(const ProtocolParams& q,
                                            const ChannelModel& channel,
                                            std::uint64_t runs, Rng& rng,
                                            RunMode mode = RunMode::Real) {
    if (runs < 1) throw std::invalid_argument("keyrate_experiment: runs >= 1");
    ExperimentSummary sum;
    sum.runs = runs;
    double info_err = 0, tz_err = 0, tx_err = 0, tc = 0, tc2 = 0;
    for (std::uint64_t it = 0; it < runs; ++it) {
        const ProtocolTranscript t = run_protocol(q, channel, mode, rng);
        BasisPartition part = BasisPartition::from_strings(t.b, t.s);
        const BitString c_i = t.c.select(part.info);
        info_err += static_cast<double>(c_i.weight()) / part.info.size();
        if (!part.test_z.empty())
            tz_err += static_cast<double>(t.c.select(part.test_z).weight()) /
                      part.test_z.size();
        if (!part.test_x.empty())
            tx_err += static_cast<double>(t.c.select(part.test_x).weight()) /
                      part.test_x.size();
        const double tcount =
            static_cast<double>(t.c.select(part.test).weight());
        tc += tcount;
        tc2 += tcount * tcount;
        if (t.aborted) {
            ++sum.aborts;
            continue;
        }
        ++sum.passed;
        if (!t.keys_match()) ++sum.reconciliation_failures;
    }
    const double n = static_cast<double>(runs);
    sum.abort_rate = wilson_interval(sum.aborts, runs);
    sum.failure_rate = wilson_interval(sum.reconciliation_failures, runs);
    sum.failure_rate_given_pass =
        wilson_interval(sum.reconciliation_failures, std::max<std::uint64_t>(1, sum.passed));
    sum.mean_info_error_rate = info_err / n;
    sum.mean_test_z_error_rate = tz_err / n;
    sum.mean_test_x_error_rate = tx_err / n;
    sum.mean_test_error_count = tc / n;
    sum.var_test_error_count = tc2 / n - (tc / n) * (tc / n);
    return sum;
}

// Line-oriented transcript record. Field order:
// variant mode aborted test b s b_used i j xi pc pk k kb
// Bitstrings are '0'/'1' ASCII (leftmost = index 0), matrices join rows
// with ';', '-' stands for an absent value.
inline std::string transcript_to_line(const ProtocolTranscript& t) {
    auto bits = [](const BitString& v) -> std::string {
        return v.size() == 0 ? "-" : v.to_string();
    };
    auto mat = [](const BitMatrix& v) -> std::string {
        return v.rows() == 0 ? "-" : v.to_string();
    };
    std::string line = variant_name(t.variant);
    line += t.mode == RunMode::Real ? " real" : " inverted-info-basis";
    line += t.aborted ? " 1" : " 0";
    line += t.test_passed ? " 1" : " 0";
    line += ' ';
    line += bits(t.b) + ' ' + bits(t.s) + ' ' + bits(t.b_used) + ' ' +
            bits(t.i) + ' ' + bits(t.j) + ' ';
    line += t.aborted ? "-" : bits(t.xi);
    line += ' ';
    line += mat(t.P_C) + ' ' + mat(t.P_K) + ' ';
    line += t.aborted ? "-" : bits(t.k);
    line += ' ';
    line += t.k_B ? bits(*t.k_B) : std::string("-");
    return line;
}

}  // namespace qkd
