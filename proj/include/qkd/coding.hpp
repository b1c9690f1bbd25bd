#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qkd/gf2.hpp"
#include "qkd/rng.hpp"
#include "qkd/stats.hpp"

namespace qkd {

// Binary entropy, with the h2(0) = h2(1) = 0 convention. Long double
// internally: the bound formulas multiply it by n, which can reach 1e6.
inline long double h2l(long double x) {
    if (x < 0.0L || x > 1.0L) throw std::invalid_argument("h2: x outside [0,1]");
    if (x == 0.0L || x == 1.0L) return 0.0L;
    return (-x * std::log2(x) - (1.0L - x) * std::log2(1.0L - x));
}

inline double h2(double x) { return static_cast<double>(h2l(x)); }

// 2^{n [H2(t/n) - r/n]}: the random-code bound used throughout.
inline double random_code_bound(std::size_t n, std::size_t k, std::size_t t) {
    const long double nn = static_cast<long double>(n);
    const long double r = static_cast<long double>(n - k);
    return static_cast<double>(
        std::exp2(nn * (h2l(static_cast<long double>(t) / nn) - r / nn)));
}

enum class DecodeStatus { Decoded, TieFail };

struct DecodeOutcome {
    DecodeStatus status = DecodeStatus::TieFail;
    BitString word;  // valid only when status == Decoded

    bool decoded() const { return status == DecodeStatus::Decoded; }
};

// An [n,k] binary linear code held by its parity-check matrix (r x n,
// rank r) with the generator derived as a kernel basis. Decoding is
// exhaustive over the 2^k codewords; desk scale only.
class LinearCode {
public:
    explicit LinearCode(BitMatrix parity_check)
        : parity_check_(std::move(parity_check)) {
        n_ = parity_check_.cols();
        r_ = parity_check_.rows();
        if (rank(parity_check_) != r_)
            throw std::invalid_argument("LinearCode: parity check not full rank");
        k_ = n_ - r_;
        generator_ = BitMatrix::from_rows(kernel_basis(parity_check_));
        if (generator_.rows() != k_)
            throw std::logic_error("LinearCode: kernel dimension mismatch");
    }

    static LinearCode from_generator(const BitMatrix& generator) {
        if (rank(generator) != generator.rows())
            throw std::invalid_argument("LinearCode: generator not full rank");
        auto dual = kernel_basis(generator);
        BitMatrix pc = dual.empty() ? BitMatrix(0, generator.cols())
                                    : BitMatrix::from_rows(std::move(dual));
        return LinearCode(std::move(pc), generator);
    }

    std::size_t n() const { return n_; }
    std::size_t k() const { return k_; }
    std::size_t r() const { return r_; }
    const BitMatrix& parity_check() const { return parity_check_; }
    const BitMatrix& generator() const { return generator_; }

    // Visits all 2^k codewords of the coset `base + C` in Gray-code order.
    template <typename F>
    void for_each_coset_word(const BitString& base, F&& f) const {
        BitString w = base;
        f(w);
        const std::uint64_t total = std::uint64_t(1) << k_;
        for (std::uint64_t i = 1; i < total; ++i) {
            // Gray step: flip the generator row of the lowest set bit of i.
            w ^= generator_.row(std::countr_zero(i));
            f(w);
        }
    }

    template <typename F>
    void for_each_codeword(F&& f) const {
        for_each_coset_word(BitString(n_), std::forward<F>(f));
    }

private:
    LinearCode(BitMatrix pc, BitMatrix gen)
        : parity_check_(std::move(pc)), generator_(gen) {
        n_ = generator_.cols();
        k_ = generator_.rows();
        r_ = n_ - k_;
    }

    BitMatrix parity_check_;
    BitMatrix generator_;
    std::size_t n_ = 0, k_ = 0, r_ = 0;
};

// w * P_C^T; zero iff w is a codeword.
inline BitString syndrome(const LinearCode& code, const BitString& w) {
    return mat_vec(code.parity_check(), w);
}

namespace detail {

// Nearest member of `base + C` to w; tie -> fail.
inline DecodeOutcome nearest_in_coset(const LinearCode& code,
                                      const BitString& base,
                                      const BitString& w) {
    if (w.size() != code.n())
        throw std::invalid_argument("decode: length mismatch");
    std::size_t best = code.n() + 1;
    bool tie = false;
    BitString best_word;
    code.for_each_coset_word(base, [&](const BitString& z) {
        const std::size_t d = z.hamming_distance(w);
        if (d < best) {
            best = d;
            best_word = z;
            tie = false;
        } else if (d == best) {
            tie = true;
        }
    });
    if (tie) return {DecodeStatus::TieFail, BitString()};
    return {DecodeStatus::Decoded, best_word};
}

}  // namespace detail

inline DecodeOutcome nearest_codeword_decode(const LinearCode& code,
                                             const BitString& w) {
    return detail::nearest_in_coset(code, BitString(code.n()), w);
}

// Nearest word in C_xi = {z : z P_C^T = xi}; the decoded word always has
// syndrome xi.
inline DecodeOutcome coset_decode(const LinearCode& code, const BitString& xi,
                                  const BitString& w) {
    if (xi.size() != code.r())
        throw std::invalid_argument("coset_decode: syndrome length mismatch");
    auto base = solve_transposed(code.parity_check(), xi);
    if (!base)
        throw std::logic_error("coset_decode: inconsistent syndrome");
    return detail::nearest_in_coset(code, *base, w);
}

// True iff weight(e) < d_H(e, c) for every nonzero codeword c, i.e. the
// codeword nearest to e is uniquely 0. Decoding the error e succeeds
// exactly in this case, for both decoders above.
inline bool zero_uniquely_nearest(const LinearCode& code, const BitString& e) {
    if (e.size() != code.n())
        throw std::invalid_argument("zero_uniquely_nearest: length mismatch");
    const std::size_t w = e.weight();
    bool ok = true;
    code.for_each_codeword([&](const BitString& c) {
        if (!c.is_zero() && e.hamming_distance(c) <= w) ok = false;
    });
    return ok;
}

// Exhaustively confirms, for every error word e, that the two decoders
// succeed exactly when the codeword nearest to e is uniquely zero, with
// the original word irrelevant. `samples_per_error` random original words
// are tried for each decoder.
inline bool verify_decoder_equivalence(const LinearCode& code, Rng& rng,
                                       std::size_t max_n = 14,
                                       std::size_t samples_per_error = 2) {
    const std::size_t n = code.n();
    if (n > max_n)
        throw std::invalid_argument("verify_decoder_equivalence: n too large");
    if (code.r() == 0) return true;  // decode is the identity, nothing to check
    const std::uint64_t total = std::uint64_t(1) << n;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        const BitString e = BitString::from_bits(bits, n);
        const bool expected = zero_uniquely_nearest(code, e);
        for (std::size_t s = 0; s < samples_per_error; ++s) {
            // Nearest-codeword decoder on a random codeword plus e.
            BitString u = BitString::random(code.k(), rng);
            BitString a(n);
            for (std::size_t row = 0; row < code.k(); ++row)
                if (u.get(row)) a ^= code.generator().row(row);
            auto out = nearest_codeword_decode(code, a ^ e);
            const bool success = out.decoded() && out.word == a;
            if (success != expected) return false;

            // Coset decoder on a random original word plus e.
            BitString i = BitString::random(n, rng);
            const BitString xi = syndrome(code, i);
            auto cout = coset_decode(code, xi, i ^ e);
            if (cout.decoded() && syndrome(code, cout.word) != xi) return false;
            const bool csuccess = cout.decoded() && cout.word == i;
            if (csuccess != expected) return false;
        }
    }
    return true;
}

// Uniform [n,k] code via a uniform k x n generator matrix, redrawn until
// full rank.
inline LinearCode random_code(std::size_t n, std::size_t k, Rng& rng) {
    while (true) {
        BitMatrix g = BitMatrix::random(k, n, rng);
        if (rank(g) == k) return LinearCode::from_generator(g);
    }
}

// Error word of weight exactly t (uniform support).
inline BitString random_error_exact_weight(std::size_t n, std::size_t t,
                                           Rng& rng) {
    BitString e(n);
    std::size_t placed = 0;
    while (placed < t) {
        const std::size_t pos = static_cast<std::size_t>(rng.next_below(n));
        if (!e.get(pos)) {
            e.set(pos, true);
            ++placed;
        }
    }
    return e;
}

enum class ErrorWeightMode {
    Exact,      // |e| = t, the hardest case covered by the bound
    UniformUpTo // |e| uniform over {0..t}
};

struct McEstimate {
    std::size_t n = 0, k = 0, t = 0;
    std::uint64_t trials = 0;
    std::uint64_t failures = 0;
    Interval ci;
    double bound = 0.0;  // 2^{n [H2(t/n) - r/n]}
};

// Monte Carlo estimate of the probability that a random [n,k] code cannot
// correct an error of weight t (weight <= t in UniformUpTo mode).
inline McEstimate mc_decoding_failure_rate(
    std::size_t n, std::size_t k, std::size_t t, std::uint64_t trials,
    Rng& rng, ErrorWeightMode mode = ErrorWeightMode::Exact) {
    if (t < 1 || 2 * t > n)
        throw std::invalid_argument("mc_decoding_failure_rate: need 1 <= t <= n/2");
    if (trials < 1)
        throw std::invalid_argument("mc_decoding_failure_rate: trials >= 1");
    McEstimate est{n, k, t, trials, 0, {}, random_code_bound(n, k, t)};
    for (std::uint64_t it = 0; it < trials; ++it) {
        LinearCode code = random_code(n, k, rng);
        const std::size_t w =
            mode == ErrorWeightMode::Exact
                ? t
                : static_cast<std::size_t>(rng.next_below(t + 1));
        const BitString e = random_error_exact_weight(n, w, rng);
        if (!zero_uniquely_nearest(code, e)) ++est.failures;
    }
    est.ci = wilson_interval(est.failures, trials);
    return est;
}

// Monte Carlo estimate of Pr_C[exists z in ell+C : z != ell, |z| <= t].
inline McEstimate mc_low_weight_coset_word(const BitString& ell, std::size_t n,
                                           std::size_t k, std::size_t t,
                                           std::uint64_t trials, Rng& rng) {
    if (ell.size() != n)
        throw std::invalid_argument("mc_low_weight_coset_word: ell length");
    if (t < 1 || 2 * t > n)
        throw std::invalid_argument("mc_low_weight_coset_word: need 1 <= t <= n/2");
    if (trials < 1)
        throw std::invalid_argument("mc_low_weight_coset_word: trials >= 1");
    McEstimate est{n, k, t, trials, 0, {}, random_code_bound(n, k, t)};
    for (std::uint64_t it = 0; it < trials; ++it) {
        LinearCode code = random_code(n, k, rng);
        bool found = false;
        code.for_each_coset_word(ell, [&](const BitString& z) {
            if (z != ell && z.weight() <= t) found = true;
        });
        if (found) ++est.failures;
    }
    est.ci = wilson_interval(est.failures, trials);
    return est;
}

}  // namespace qkd
