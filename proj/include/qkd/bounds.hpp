#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/coding.hpp"
#include "qkd/rng.hpp"
#include "qkd/stats.hpp"

namespace qkd {

enum class Variant { Bb84InfoZ, Bb84, Efficient, ModifiedEfficient };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Bb84InfoZ: return "bb84-info-z";
        case Variant::Bb84: return "bb84";
        case Variant::Efficient: return "efficient";
        case Variant::ModifiedEfficient: return "modified-efficient";
    }
    return "?";
}

inline std::optional<Variant> variant_from_name(const std::string& s) {
    if (s == "bb84-info-z") return Variant::Bb84InfoZ;
    if (s == "bb84") return Variant::Bb84;
    if (s == "efficient") return Variant::Efficient;
    if (s == "modified-efficient") return Variant::ModifiedEfficient;
    return std::nullopt;
}

namespace detail {

inline bool near_integer(double x) {
    return std::fabs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::fabs(x));
}

inline long double logsumexp(const std::vector<long double>& ln_terms) {
    long double mx = -std::numeric_limits<long double>::infinity();
    for (auto v : ln_terms) mx = std::max(mx, v);
    if (std::isinf(mx) && mx < 0) return mx;
    long double s = 0.0L;
    for (auto v : ln_terms) s += std::exp(v - mx);
    return mx + std::log(s);
}

}  // namespace detail

// Smallest eps' >= eps with n (p + eps') an integer. The theorems assume
// integrality of n (p_a + eps); silently rounding would misstate the bound.
inline double nudge_eps_up(std::size_t n, double p, double eps) {
    const double target = std::ceil(static_cast<double>(n) * (p + eps) - 1e-9);
    return target / static_cast<double>(n) - p;
}

// Variant configuration. Counts are absolute; the thresholds not used by a
// variant stay zero. The slack parameters are only needed by the bound
// formulas and stay unset for plain protocol runs.
struct ProtocolParams {
    Variant variant = Variant::Bb84;
    std::size_t N = 0;   // qubits sent
    std::size_t n = 0;   // INFO bits
    std::size_t n_z = 0, n_x = 0;  // TEST-Z / TEST-X counts
    std::size_t t_z = 0, t_x = 0;  // INFO-Z / INFO-X counts (modified-efficient)
    std::size_t r = 0, m = 0;      // syndrome / key lengths
    double p = 0.0;                // z-basis probability (efficient)
    double p_a = 0.0, p_az = 0.0, p_ax = 0.0;
    std::optional<double> eps_sec, eps_rel;

    static ProtocolParams bb84_info_z(std::size_t n, std::size_t n_z,
                                      std::size_t n_x, std::size_t r,
                                      std::size_t m, double p_az, double p_ax,
                                      std::optional<double> eps_sec = {},
                                      std::optional<double> eps_rel = {}) {
        ProtocolParams q;
        q.variant = Variant::Bb84InfoZ;
        q.n = n; q.n_z = n_z; q.n_x = n_x; q.N = n + n_z + n_x;
        q.r = r; q.m = m; q.p_az = p_az; q.p_ax = p_ax;
        q.eps_sec = eps_sec; q.eps_rel = eps_rel;
        q.validate();
        return q;
    }

    static ProtocolParams bb84(std::size_t n, std::size_t r, std::size_t m,
                               double p_a, std::optional<double> eps_sec = {},
                               std::optional<double> eps_rel = {}) {
        ProtocolParams q;
        q.variant = Variant::Bb84;
        q.n = n; q.N = 2 * n; q.r = r; q.m = m; q.p_a = p_a;
        q.eps_sec = eps_sec; q.eps_rel = eps_rel;
        q.validate();
        return q;
    }

    static ProtocolParams efficient(std::size_t n, std::size_t n_z,
                                    std::size_t n_x, double p, std::size_t r,
                                    std::size_t m, double p_a,
                                    std::optional<double> eps_sec = {},
                                    std::optional<double> eps_rel = {}) {
        ProtocolParams q;
        q.variant = Variant::Efficient;
        q.n = n; q.n_z = n_z; q.n_x = n_x; q.N = n + n_z + n_x;
        q.p = p; q.r = r; q.m = m; q.p_a = p_a;
        q.eps_sec = eps_sec; q.eps_rel = eps_rel;
        q.validate();
        return q;
    }

    static ProtocolParams modified_efficient(
        std::size_t t_z, std::size_t t_x, std::size_t n_z, std::size_t n_x,
        std::size_t r, std::size_t m, double p_a,
        std::optional<double> eps_sec = {}, std::optional<double> eps_rel = {}) {
        ProtocolParams q;
        q.variant = Variant::ModifiedEfficient;
        q.t_z = t_z; q.t_x = t_x; q.n = t_z + t_x;
        q.n_z = n_z; q.n_x = n_x; q.N = q.n + n_z + n_x;
        q.r = r; q.m = m; q.p_a = p_a;
        q.eps_sec = eps_sec; q.eps_rel = eps_rel;
        q.validate();
        return q;
    }

    void validate() const {
        auto fail = [](const std::string& msg) {
            throw std::invalid_argument("ProtocolParams: " + msg);
        };
        if (n < 1) fail("n >= 1 required");
        if (r + m > n) fail("r + m <= n required");
        const double nn = static_cast<double>(n);
        auto check_threshold = [&](double th, const char* name) {
            if (!(th > 0.0 && th <= 0.5)) fail(std::string(name) + " in (0, 1/2] required");
        };
        auto check_eps = [&](double th, std::optional<double> eps, const char* name) {
            if (!eps) return;
            if (*eps < 0.0) fail(std::string(name) + " >= 0 required");
            if (th + *eps > 0.5 + 1e-12) fail(std::string("threshold + ") + name + " <= 1/2 required");
            if (!detail::near_integer(nn * (th + *eps)))
                fail(std::string("n * (threshold + ") + name + ") must be an integer");
        };
        switch (variant) {
            case Variant::Bb84InfoZ:
                if (N != n + n_z + n_x) fail("N = n + n_z + n_x required");
                if (n_z < 1 || n_x < 1) fail("n_z, n_x >= 1 required");
                check_threshold(p_az, "p_az");
                check_threshold(p_ax, "p_ax");
                check_eps(p_ax, eps_sec, "eps_sec");
                check_eps(p_az, eps_rel, "eps_rel");
                break;
            case Variant::Bb84:
                if (N != 2 * n) fail("N = 2n required");
                check_threshold(p_a, "p_a");
                check_eps(p_a, eps_sec, "eps_sec");
                check_eps(p_a, eps_rel, "eps_rel");
                break;
            case Variant::Efficient:
                if (N != n + n_z + n_x) fail("N = n + n_z + n_x required");
                if (!(p > 0.0 && p <= 0.5)) fail("p in (0, 1/2] required");
                if (!(n_z > 0 && 2.0 * n_z < p * N)) fail("0 < n_z < pN/2 required");
                if (!(n_x > 0 && 2.0 * n_x < (1.0 - p) * N))
                    fail("0 < n_x < (1-p)N/2 required");
                check_threshold(p_a, "p_a");
                check_eps(p_a, eps_sec, "eps_sec");
                check_eps(p_a, eps_rel, "eps_rel");
                break;
            case Variant::ModifiedEfficient:
                if (t_z < 1 || t_x < 1) fail("t_z, t_x >= 1 required");
                if (n != t_z + t_x) fail("n = t_z + t_x required");
                if (N != n + n_z + n_x) fail("N = n + n_z + n_x required");
                if (n_z < 1 || n_x < 1) fail("n_z, n_x >= 1 required");
                check_threshold(p_a, "p_a");
                check_eps(p_a, eps_sec, "eps_sec");
                check_eps(p_a, eps_rel, "eps_rel");
                break;
        }
    }
};

struct BoundTerm {
    std::string label;
    double value = 0.0;       // exp of the log value; may under/overflow
    double log2_value = 0.0;  // exact in log space
};

// Itemized finite-key bound: total = sum(reliability) + 2m sqrt(sum(secrecy)).
struct SecurityBound {
    std::vector<BoundTerm> reliability_terms;
    std::vector<BoundTerm> secrecy_terms_under_radical;
    double total = 0.0;
    double log2_total = 0.0;
    double key_rate = 0.0;  // m / n
    // Exploratory variant with the secrecy radical weighted 2 instead of
    // 2m. Not a theorem statement; reported only when asked for.
    double total_without_m_factor = 0.0;
};

namespace detail {

constexpr long double kLn2 = 0.69314718055994530941723L;

struct LnTerm {
    std::string label;
    long double ln;
};

// Assembles the bound from natural-log terms; exponentials are taken last.
inline SecurityBound assemble_bound(const std::vector<LnTerm>& rel,
                                    const std::vector<LnTerm>& sec,
                                    std::size_t m, std::size_t n) {
    SecurityBound b;
    std::vector<long double> rel_ln, sec_ln;
    for (const auto& t : rel) {
        b.reliability_terms.push_back(
            {t.label, static_cast<double>(std::exp(t.ln)),
             static_cast<double>(t.ln / kLn2)});
        rel_ln.push_back(t.ln);
    }
    for (const auto& t : sec) {
        b.secrecy_terms_under_radical.push_back(
            {t.label, static_cast<double>(std::exp(t.ln)),
             static_cast<double>(t.ln / kLn2)});
        sec_ln.push_back(t.ln);
    }
    const long double ln_rel = logsumexp(rel_ln);
    long double ln_total;
    if (m == 0) {
        ln_total = ln_rel;
    } else {
        const long double ln_secrecy =
            std::log(2.0L * static_cast<long double>(m)) +
            0.5L * logsumexp(sec_ln);
        ln_total = logsumexp({ln_rel, ln_secrecy});
    }
    b.total = static_cast<double>(std::exp(ln_total));
    b.log2_total = static_cast<double>(ln_total / kLn2);
    b.key_rate = static_cast<double>(m) / static_cast<double>(n);
    return b;
}

// ln of 2^{n [H2(x) - frac]}.
inline long double ln_pow2_code(long double n, long double x, long double frac) {
    return kLn2 * n * (h2l(x) - frac);
}

inline void require_eps(const ProtocolParams& q) {
    if (!q.eps_sec || !q.eps_rel)
        throw std::invalid_argument("bound: eps_sec and eps_rel required");
}

}  // namespace detail

// exp(-2 (n'/(n+n'))^2 n eps^2): tail of sampling without replacement for a
// partition into substrings of lengths n and n'.
inline double hoeffding_partition_bound(std::size_t n, std::size_t n_prime,
                                        double eps) {
    if (n < 1 || n_prime < 1)
        throw std::invalid_argument("hoeffding_partition_bound: n, n' >= 1");
    const long double a = static_cast<long double>(n_prime) /
                          static_cast<long double>(n + n_prime);
    return static_cast<double>(std::exp(
        -2.0L * a * a * static_cast<long double>(n) *
        static_cast<long double>(eps) * static_cast<long double>(eps)));
}

// Tail bounds on |b| <= (1-p)N/2 and |~b| <= pN/2 when each bit is 1 with
// probability 1-p: (e^{-N(1-p)^2/2}, e^{-Np^2/2}).
inline std::pair<double, double> hoeffding_basis_count_bounds(std::size_t N,
                                                              double p) {
    if (!(p > 0.0 && p <= 0.5))
        throw std::invalid_argument("hoeffding_basis_count_bounds: p in (0,1/2]");
    const long double Nn = static_cast<long double>(N);
    const long double pp = static_cast<long double>(p);
    return {static_cast<double>(std::exp(-0.5L * Nn * (1.0L - pp) * (1.0L - pp))),
            static_cast<double>(std::exp(-0.5L * Nn * pp * pp))};
}

struct PartitionTailEstimate {
    double max_estimate = 0.0;  // max over swept string weights
    Interval ci_at_max;
    std::size_t worst_weight = 0;
    double bound = 0.0;  // hoeffding_partition_bound(n, n', eps)
};

// Empirical Pr[(|C_A|/n >= p+eps) and (|C_B|/n' <= p)] under a uniform
// partition, maximized over the weight of the underlying string (the
// adversary chooses the string; only its weight matters).
inline PartitionTailEstimate mc_partition_tail(std::size_t n,
                                               std::size_t n_prime, double p,
                                               double eps,
                                               std::uint64_t trials_per_weight,
                                               Rng& rng) {
    PartitionTailEstimate out;
    out.bound = hoeffding_partition_bound(n, n_prime, eps);
    const std::size_t total = n + n_prime;
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t w = 0; w <= total; ++w) {
        std::uint64_t hits = 0;
        for (std::uint64_t it = 0; it < trials_per_weight; ++it) {
            // Partial Fisher-Yates: the first n entries form C_A. Positions
            // below w carry the 1-bits.
            std::size_t ones_a = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng.next_below(total - i));
                std::swap(idx[i], idx[j]);
                if (idx[i] < w) ++ones_a;
            }
            const std::size_t ones_b = w - ones_a;
            const bool ev_a = static_cast<double>(ones_a) >=
                              (p + eps) * static_cast<double>(n) - 1e-12;
            const bool ev_b = static_cast<double>(ones_b) <=
                              p * static_cast<double>(n_prime) + 1e-12;
            if (ev_a && ev_b) ++hits;
        }
        const Interval iv = wilson_interval(hits, trials_per_weight);
        if (iv.estimate >= out.max_estimate) {
            out.max_estimate = iv.estimate;
            out.ci_at_max = iv;
            out.worst_weight = w;
        }
    }
    return out;
}

// Empirical counterparts of hoeffding_basis_count_bounds at one (N, p).
inline std::pair<Interval, Interval> mc_basis_count_tails(std::size_t N,
                                                          double p,
                                                          std::uint64_t trials,
                                                          Rng& rng) {
    std::uint64_t low_ones = 0, low_zeros = 0;
    for (std::uint64_t it = 0; it < trials; ++it) {
        std::size_t ones = 0;
        for (std::size_t i = 0; i < N; ++i)
            if (!rng.bernoulli(p)) ++ones;  // b_i = 1 with probability 1-p
        const std::size_t zeros = N - ones;
        if (2.0 * ones <= (1.0 - p) * N) ++low_ones;
        if (2.0 * zeros <= p * N) ++low_zeros;
    }
    return {wilson_interval(low_ones, trials), wilson_interval(low_zeros, trials)};
}

inline SecurityBound bound_bb84_info_z(const ProtocolParams& q) {
    if (q.variant != Variant::Bb84InfoZ)
        throw std::invalid_argument("bound_bb84_info_z: wrong variant");
    q.validate();
    detail::require_eps(q);
    const long double n = q.n, nz = q.n_z, nx = q.n_x;
    const long double er = *q.eps_rel, es = *q.eps_sec;
    const long double rf = static_cast<long double>(q.r) / n;
    const long double qf = (n - q.r - q.m) / n;
    std::vector<detail::LnTerm> rel = {
        {"sampling_test_z", -2.0L * (nz / (n + nz)) * (nz / (n + nz)) * n * er * er},
        {"ecc_failure", detail::ln_pow2_code(n, q.p_az + er, rf)},
    };
    std::vector<detail::LnTerm> sec = {
        {"sampling_test_x", -2.0L * (nx / (n + nx)) * (nx / (n + nx)) * n * es * es},
        {"pa_residual", detail::ln_pow2_code(n, q.p_ax + es, qf)},
    };
    return detail::assemble_bound(rel, sec, q.m, q.n);
}

inline SecurityBound bound_bb84(const ProtocolParams& q) {
    if (q.variant != Variant::Bb84)
        throw std::invalid_argument("bound_bb84: wrong variant");
    q.validate();
    detail::require_eps(q);
    const long double n = q.n;
    const long double er = *q.eps_rel, es = *q.eps_sec;
    const long double rf = static_cast<long double>(q.r) / n;
    const long double qf = (n - q.r - q.m) / n;
    std::vector<detail::LnTerm> rel = {
        {"sampling_test", -0.5L * n * er * er},
        {"ecc_failure", detail::ln_pow2_code(n, q.p_a + er, rf)},
    };
    std::vector<detail::LnTerm> sec = {
        {"sampling_test", -0.5L * n * es * es},
        {"pa_residual", detail::ln_pow2_code(n, q.p_a + es, qf)},
    };
    return detail::assemble_bound(rel, sec, q.m, q.n);
}

inline SecurityBound bound_efficient(const ProtocolParams& q) {
    if (q.variant != Variant::Efficient)
        throw std::invalid_argument("bound_efficient: wrong variant");
    q.validate();
    detail::require_eps(q);
    const long double N = q.N, n = q.n, nz = q.n_z, nx = q.n_x, p = q.p;
    const long double er = *q.eps_rel, es = *q.eps_sec;
    const long double rf = static_cast<long double>(q.r) / n;
    const long double qf = (n - q.r - q.m) / n;
    const long double fz = nz / (n + nz), fx = nx / (n + nx);
    const long double mz = p * N / 2.0L - nz;          // min INFO-Z count
    const long double mx = (1.0L - p) * N / 2.0L - nx; // min INFO-X count
    std::vector<detail::LnTerm> rel = {
        {"basis_count_z", -0.5L * N * p * p},
        {"sampling_info_z", -2.0L * fz * fz * mz * er * er},
        {"basis_count_x", -0.5L * N * (1.0L - p) * (1.0L - p)},
        {"sampling_info_x", -2.0L * fx * fx * mx * er * er},
        {"ecc_failure", detail::ln_pow2_code(n, q.p_a + er, rf)},
    };
    std::vector<detail::LnTerm> sec = {
        {"basis_count_z", -0.5L * N * p * p},
        {"sampling_info_z_x", -2.0L * fx * fx * mz * es * es},
        {"basis_count_x", -0.5L * N * (1.0L - p) * (1.0L - p)},
        {"sampling_info_x_z", -2.0L * fz * fz * mx * es * es},
        {"pa_residual", detail::ln_pow2_code(n, q.p_a + es, qf)},
    };
    return detail::assemble_bound(rel, sec, q.m, q.n);
}

inline SecurityBound bound_modified_efficient(const ProtocolParams& q) {
    if (q.variant != Variant::ModifiedEfficient)
        throw std::invalid_argument("bound_modified_efficient: wrong variant");
    q.validate();
    detail::require_eps(q);
    const long double n = q.n, tz = q.t_z, tx = q.t_x, nz = q.n_z, nx = q.n_x;
    const long double er = *q.eps_rel, es = *q.eps_sec;
    const long double rf = static_cast<long double>(q.r) / n;
    const long double qf = (n - q.r - q.m) / n;
    std::vector<detail::LnTerm> rel = {
        {"sampling_info_z", -2.0L * (nz / (tz + nz)) * (nz / (tz + nz)) * tz * er * er},
        {"sampling_info_x", -2.0L * (nx / (tx + nx)) * (nx / (tx + nx)) * tx * er * er},
        {"ecc_failure", detail::ln_pow2_code(n, q.p_a + er, rf)},
    };
    std::vector<detail::LnTerm> sec = {
        {"sampling_info_z_x", -2.0L * (nx / (tz + nx)) * (nx / (tz + nx)) * tz * es * es},
        {"sampling_info_x_z", -2.0L * (nz / (tx + nz)) * (nz / (tx + nz)) * tx * es * es},
        {"pa_residual", detail::ln_pow2_code(n, q.p_a + es, qf)},
    };
    return detail::assemble_bound(rel, sec, q.m, q.n);
}

inline SecurityBound compute_bound(const ProtocolParams& q) {
    switch (q.variant) {
        case Variant::Bb84InfoZ: return bound_bb84_info_z(q);
        case Variant::Bb84: return bound_bb84(q);
        case Variant::Efficient: return bound_efficient(q);
        case Variant::ModifiedEfficient: return bound_modified_efficient(q);
    }
    throw std::logic_error("compute_bound: bad variant");
}

// The two reliability terms of the standard-protocol bound on their own,
// for comparing against empirical Pr[(k != k^B) and (T = 1)]. No
// integrality gate: this is a plain formula evaluation.
inline double bb84_reliability_terms(std::size_t n, double p_a, double eps_rel,
                                     std::size_t r) {
    const long double nn = n;
    return static_cast<double>(
        std::exp(-0.5L * nn * static_cast<long double>(eps_rel) *
                 static_cast<long double>(eps_rel)) +
        std::exp(detail::ln_pow2_code(nn, p_a + eps_rel,
                                      static_cast<long double>(r) / nn)));
}

inline double info_z_reliability_terms(std::size_t n, std::size_t n_z,
                                       double p_az, double eps_rel,
                                       std::size_t r) {
    const long double nn = n, nz = n_z;
    const long double er = eps_rel;
    return static_cast<double>(
        std::exp(-2.0L * (nz / (nn + nz)) * (nz / (nn + nz)) * nn * er * er) +
        std::exp(detail::ln_pow2_code(nn, p_az + eps_rel,
                                      static_cast<long double>(r) / nn)));
}

// Inverse of H2 on [0, 1/2], by bisection.
inline double h2_inverse(double y, double tol = 1e-12) {
    if (!(y >= 0.0 && y <= 1.0))
        throw std::invalid_argument("h2_inverse: y outside [0,1]");
    if (y == 0.0) return 0.0;
    if (y == 1.0) return 0.5;  // bisection cannot resolve the flat maximum
    double lo = 0.0, hi = 0.5;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (h2(mid) < y) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Asymptotic error-rate threshold. For the symmetric variants this is the
// root of 2 H2(p) = 1 on (0, 1/2); for BB84-INFO-z it is the p_ax solving
// H2(p_ax) = 1 - H2(p_az).
inline double asymptotic_threshold(Variant v,
                                   std::optional<double> p_az = {}) {
    if (v == Variant::Bb84InfoZ) {
        if (!p_az || !(*p_az >= 0.0 && *p_az < 0.5))
            throw std::invalid_argument("asymptotic_threshold: p_az in [0, 1/2) required");
        return h2_inverse(1.0 - h2(*p_az), 1e-12);
    }
    return h2_inverse(0.5, 1e-12);
}

// Right-hand side of the variant's key-rate inequality, clamped below at 0.
inline double max_key_rate(Variant v, double p_a_or_az, double p_ax,
                           double eps_sec, double eps_rel) {
    double rate;
    if (v == Variant::Bb84InfoZ) {
        rate = 1.0 - h2(p_ax + eps_sec) - h2(p_a_or_az + eps_rel);
    } else {
        rate = 1.0 - h2(p_a_or_az + eps_sec) - h2(p_a_or_az + eps_rel);
    }
    return std::max(0.0, rate);
}

inline double max_key_rate(Variant v, double p_a, double eps_sec,
                           double eps_rel) {
    if (v == Variant::Bb84InfoZ)
        throw std::invalid_argument("max_key_rate: bb84-info-z needs p_az and p_ax");
    return max_key_rate(v, p_a, p_a, eps_sec, eps_rel);
}

}  // namespace qkd
