#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkd/coding.hpp"

using namespace qkd;

namespace {

// Repetition code of odd length: C = {00..0, 11..1}.
LinearCode repetition_code(std::size_t n) {
    BitMatrix pc(n - 1, n);
    for (std::size_t i = 0; i < n - 1; ++i) {
        pc.set(i, 0, true);
        pc.set(i, i + 1, true);
    }
    return LinearCode(std::move(pc));
}

}  // namespace

TEST_CASE("rep-3 structure") {
    LinearCode rep3 = repetition_code(3);
    CHECK(rep3.n() == 3);
    CHECK(rep3.k() == 1);
    CHECK(rep3.r() == 2);
    // Every generator row has zero syndrome.
    for (std::size_t i = 0; i < rep3.generator().rows(); ++i)
        CHECK(syndrome(rep3, rep3.generator().row(i)).is_zero());
    std::size_t count = 0;
    rep3.for_each_codeword([&](const BitString&) { ++count; });
    CHECK(count == 2);
}

TEST_CASE("syndrome examples (rep-3 with P_C = 110;101)") {
    LinearCode rep3(BitMatrix::from_string("110;101"));
    CHECK(syndrome(rep3, BitString::from_string("000")).is_zero());
    CHECK(syndrome(rep3, BitString::from_string("111")).is_zero());
    CHECK(syndrome(rep3, BitString::from_string("101")).to_string() == "10");
    CHECK_THROWS_AS(syndrome(rep3, BitString(4)), std::invalid_argument);
}

TEST_CASE("nearest codeword decode examples") {
    LinearCode rep3 = repetition_code(3);
    auto out = nearest_codeword_decode(rep3, BitString::from_string("110"));
    REQUIRE(out.decoded());
    CHECK(out.word.to_string() == "111");

    out = nearest_codeword_decode(rep3, BitString::from_string("000"));
    REQUIRE(out.decoded());
    CHECK(out.word.to_string() == "000");

    LinearCode rep2(BitMatrix::from_string("11"));  // C = {00, 11}
    out = nearest_codeword_decode(rep2, BitString::from_string("10"));
    CHECK(out.status == DecodeStatus::TieFail);
}

TEST_CASE("coset decode examples") {
    LinearCode rep3(BitMatrix::from_string("110;101"));

    // xi = 0 reduces to nearest-codeword decoding.
    auto out = coset_decode(rep3, BitString(2), BitString::from_string("110"));
    REQUIRE(out.decoded());
    CHECK(out.word.to_string() == "111");

    // w itself in the coset at distance zero.
    const BitString w = BitString::from_string("101");
    const BitString xi = syndrome(rep3, w);
    CHECK(xi.to_string() == "10");
    out = coset_decode(rep3, xi, w);
    REQUIRE(out.decoded());
    CHECK(out.word == w);

    // Coset C_10 = {101, 010}: distances to 111 are 1 and 2.
    out = coset_decode(rep3, BitString::from_string("10"),
                       BitString::from_string("111"));
    REQUIRE(out.decoded());
    CHECK(out.word.to_string() == "101");
}

TEST_CASE("coset decode output always has the requested syndrome") {
    Rng rng(23);
    for (int it = 0; it < 200; ++it) {
        const std::size_t n = 3 + rng.next_below(6);
        const std::size_t k = 1 + rng.next_below(n - 1);
        LinearCode code = random_code(n, k, rng);
        BitString xi = BitString::random(code.r(), rng);
        BitString w = BitString::random(n, rng);
        auto out = coset_decode(code, xi, w);
        if (out.decoded()) CHECK(syndrome(code, out.word) == xi);
    }
}

TEST_CASE("zero_uniquely_nearest examples") {
    LinearCode rep3 = repetition_code(3);
    CHECK(zero_uniquely_nearest(rep3, BitString::from_string("100")));
    CHECK_FALSE(zero_uniquely_nearest(rep3, BitString::from_string("110")));
    CHECK(zero_uniquely_nearest(rep3, BitString(3)));
}

TEST_CASE("decoder equivalence on small codes") {
    Rng rng(31);
    CHECK(verify_decoder_equivalence(repetition_code(3), rng));

    // [2,1] code {00,11}: both decoders fail exactly on weight-1 errors.
    LinearCode rep2(BitMatrix::from_string("11"));
    CHECK(verify_decoder_equivalence(rep2, rng));
    CHECK_FALSE(zero_uniquely_nearest(rep2, BitString::from_string("01")));
    CHECK_FALSE(zero_uniquely_nearest(rep2, BitString::from_string("10")));

    // Degenerate [n,n] code: r = 0, decode is the identity.
    LinearCode full(BitMatrix(0, 3));
    CHECK(full.k() == 3);
    CHECK(verify_decoder_equivalence(full, rng));
    auto out = coset_decode(full, BitString(0), BitString::from_string("101"));
    REQUIRE(out.decoded());
    CHECK(out.word.to_string() == "101");
}

TEST_CASE("translation property, exhaustive on small codes") {
    // decode(a + e) -> a succeeds iff decode(b + e) -> b, for codewords a, b.
    Rng rng(37);
    for (int it = 0; it < 6; ++it) {
        const std::size_t n = 4 + rng.next_below(3);  // 4..6
        const std::size_t k = 1 + rng.next_below(3);
        LinearCode code = random_code(n, k, rng);
        std::vector<BitString> codewords;
        code.for_each_codeword(
            [&](const BitString& c) { codewords.push_back(c); });
        for (std::uint64_t e = 0; e < (std::uint64_t(1) << n); ++e) {
            const BitString err = BitString::from_bits(e, n);
            const bool expected = zero_uniquely_nearest(code, err);
            for (const auto& a : codewords) {
                auto out = nearest_codeword_decode(code, a ^ err);
                CHECK((out.decoded() && out.word == a) == expected);
            }
        }
    }
}

TEST_CASE("min distance 2t+1 corrects all weight <= t errors") {
    for (std::size_t n : {3, 5}) {
        LinearCode rep = repetition_code(n);
        const std::size_t t = (n - 1) / 2;
        for (std::uint64_t e = 0; e < (std::uint64_t(1) << n); ++e) {
            const BitString err = BitString::from_bits(e, n);
            if (err.weight() <= t) CHECK(zero_uniquely_nearest(rep, err));
        }
    }
}

TEST_CASE("mc decoding failure rate: frozen small cases") {
    Rng rng(41);
    // n=6, k=1, t=1: the exact failure probability is 6/63 (the generator
    // must fall within distance 1 of the weight-1 error: 1 + 5 of the 63
    // nonzero words). Bound 2^{6[H2(1/6) - 5/6]}.
    auto est = mc_decoding_failure_rate(6, 1, 1, 20000, rng);
    CHECK(est.bound == doctest::Approx(0.46656).epsilon(1e-12));
    CHECK(est.ci.high <= est.bound);
    CHECK(est.ci.low <= 6.0 / 63.0);
    CHECK(est.ci.high >= 6.0 / 63.0);

    // n=10, k=5, t=1: bound ~ 0.8066.
    est = mc_decoding_failure_rate(10, 5, 1, 20000, rng);
    CHECK(est.bound == doctest::Approx(0.80661712241037412).epsilon(1e-12));
    CHECK(est.ci.high <= est.bound);

    CHECK_THROWS_AS(mc_decoding_failure_rate(10, 5, 0, 10, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(mc_decoding_failure_rate(10, 5, 6, 10, rng),
                    std::invalid_argument);
}

TEST_CASE("mc decoding failure rate: uniform weight mode stays below bound") {
    Rng rng(43);
    auto est = mc_decoding_failure_rate(8, 2, 2, 20000, rng,
                                        ErrorWeightMode::UniformUpTo);
    CHECK(est.ci.high <= est.bound);
}

TEST_CASE("mc low-weight coset word examples") {
    Rng rng(47);
    // ell = 0: probability C contains a nonzero word of weight <= t.
    auto est = mc_low_weight_coset_word(BitString(8), 8, 2, 1, 20000, rng);
    CHECK(est.ci.high <= est.bound);

    // Spec-scale example: n=8, k=2, t=1, ell = 10000000.
    est = mc_low_weight_coset_word(BitString::from_string("10000000"), 8, 2, 1,
                                   20000, rng);
    CHECK(est.bound == doctest::Approx(0.31831246213008914).epsilon(1e-12));
    CHECK(est.ci.high <= est.bound);

    // Vacuous bound (> 1) still yields an estimate.
    est = mc_low_weight_coset_word(BitString(6), 6, 4, 2, 5000, rng);
    CHECK(est.bound > 1.0);
    CHECK(est.ci.estimate <= 1.0);
}

TEST_CASE("wilson interval sanity") {
    auto iv = wilson_interval(0, 1000);
    CHECK(iv.estimate == 0.0);
    CHECK(iv.low == 0.0);
    CHECK(iv.high > 0.0);
    CHECK(iv.high < 0.01);
    iv = wilson_interval(500, 1000);
    CHECK(iv.low < 0.5);
    CHECK(iv.high > 0.5);
}
