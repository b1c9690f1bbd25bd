#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "qkd/gf2.hpp"
#include "qkd/rng.hpp"

using namespace qkd;

TEST_CASE("bitstring basics and serialization") {
    BitString a = BitString::from_string("10110");
    CHECK(a.size() == 5);
    CHECK(a.weight() == 3);
    CHECK(a.to_string() == "10110");
    CHECK(a.get(0));
    CHECK_FALSE(a.get(1));

    BitString b = BitString::from_string("01110");
    CHECK((a ^ b).to_string() == "11000");
    CHECK(hamming_distance(a, b) == 2);
    CHECK((~a).to_string() == "01001");
    CHECK_THROWS_AS(a ^ BitString(4), std::invalid_argument);

    // Round trip across word boundaries.
    Rng rng(11);
    BitString longbits = BitString::random(131, rng);
    CHECK(BitString::from_string(longbits.to_string()) == longbits);
}

TEST_CASE("weight of xor equals hamming distance, translation invariant") {
    Rng rng(5);
    for (int it = 0; it < 200; ++it) {
        const std::size_t len = 1 + rng.next_below(100);
        BitString a = BitString::random(len, rng);
        BitString b = BitString::random(len, rng);
        BitString c = BitString::random(len, rng);
        CHECK((a ^ b).weight() == hamming_distance(a, b));
        CHECK(hamming_distance(a, b) == hamming_distance(c ^ a, c ^ b));
    }
}

TEST_CASE("mat_vec examples") {
    BitMatrix m = BitMatrix::from_string("110;101");
    CHECK(mat_vec(m, BitString::from_string("101")).to_string() == "10");
    CHECK(mat_vec(BitMatrix::identity(3), BitString::from_string("011"))
              .to_string() == "011");
    CHECK(mat_vec(m, BitString(3)).to_string() == "00");
    CHECK_THROWS_AS(mat_vec(m, BitString(4)), std::invalid_argument);
}

TEST_CASE("mat_vec is linear") {
    Rng rng(7);
    for (int it = 0; it < 100; ++it) {
        const std::size_t rows = 1 + rng.next_below(8);
        const std::size_t cols = 1 + rng.next_below(12);
        BitMatrix m = BitMatrix::random(rows, cols, rng);
        BitString x = BitString::random(cols, rng);
        BitString y = BitString::random(cols, rng);
        CHECK(mat_vec(m, x ^ y) == (mat_vec(m, x) ^ mat_vec(m, y)));
    }
}

TEST_CASE("rank examples") {
    CHECK(rank(BitMatrix::identity(2)) == 2);
    CHECK(rank(BitMatrix::from_string("11;11")) == 1);
    CHECK(rank(BitMatrix::from_string("110;101")) == 2);
    CHECK(rank(BitMatrix(3, 5)) == 0);
}

TEST_CASE("matrix serialization round trip") {
    BitMatrix m = BitMatrix::from_string("110;101;011");
    CHECK(BitMatrix::from_string(m.to_string()) == m);
}

TEST_CASE("random_stacked_full_rank trivial cases") {
    Rng rng(3);
    auto [pc1, pk1] = random_stacked_full_rank(1, 0, 1, rng);
    CHECK(pc1.to_string() == "1");
    CHECK(pk1.rows() == 0);

    for (int it = 0; it < 50; ++it) {
        auto [pc, pk] = random_stacked_full_rank(1, 1, 2, rng);
        std::vector<BitString> rows = {pc.row(0), pk.row(0)};
        CHECK(rank(BitMatrix::from_rows(rows)) == 2);
    }
    CHECK_THROWS_AS(random_stacked_full_rank(2, 2, 3, rng),
                    std::invalid_argument);
}

TEST_CASE("random_stacked_full_rank is uniform over valid pairs") {
    // Oracle: enumerate every rank-3 stacked 3x4 matrix by brute force.
    const std::size_t r = 2, m = 1, n = 4;
    std::map<std::string, std::size_t> valid;
    for (std::uint64_t bits = 0; bits < (1u << 12); ++bits) {
        std::vector<BitString> rows;
        for (std::size_t row = 0; row < 3; ++row)
            rows.push_back(BitString::from_bits((bits >> (row * 4)) & 0xf, 4));
        BitMatrix stacked = BitMatrix::from_rows(rows);
        if (rank(stacked) == 3) valid[stacked.to_string()] = 0;
    }
    CHECK(valid.size() == 15 * 14 * 12);  // (2^4-1)(2^4-2)(2^4-4)

    Rng rng(20240811);
    const std::size_t draws = 20 * valid.size();
    for (std::size_t it = 0; it < draws; ++it) {
        auto [pc, pk] = random_stacked_full_rank(r, m, n, rng);
        std::string key = pc.to_string() + ";" + pk.to_string();
        auto found = valid.find(key);
        REQUIRE(found != valid.end());
        ++found->second;
    }
    // Per-cell 5-sigma Poisson band plus a global chi-square band.
    const double lambda = 20.0;
    double chi2 = 0.0;
    for (const auto& [key, count] : valid) {
        CHECK(std::fabs(double(count) - lambda) <= 5.0 * std::sqrt(lambda));
        chi2 += (double(count) - lambda) * (double(count) - lambda) / lambda;
    }
    const double dof = double(valid.size()) - 1.0;
    CHECK(std::fabs(chi2 - dof) <= 5.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("kernel basis spans the kernel") {
    Rng rng(9);
    for (int it = 0; it < 50; ++it) {
        const std::size_t n = 2 + rng.next_below(9);
        const std::size_t rr = 1 + rng.next_below(n);
        auto [pc, pk] = random_stacked_full_rank(rr, 0, n, rng);
        auto basis = kernel_basis(pc);
        CHECK(basis.size() == n - rr);
        for (const auto& v : basis) CHECK(mat_vec(pc, v).is_zero());
        if (!basis.empty())
            CHECK(rank(BitMatrix::from_rows(basis)) == basis.size());
    }
}

TEST_CASE("solve_transposed finds a preimage") {
    Rng rng(13);
    for (int it = 0; it < 50; ++it) {
        const std::size_t n = 2 + rng.next_below(9);
        const std::size_t rr = 1 + rng.next_below(n);
        auto [pc, pk] = random_stacked_full_rank(rr, 0, n, rng);
        BitString y = BitString::random(rr, rng);
        auto z = solve_transposed(pc, y);
        REQUIRE(z.has_value());
        CHECK(mat_vec(pc, *z) == y);
    }
}

TEST_CASE("extend_to_basis produces an independent set") {
    Rng rng(17);
    for (int it = 0; it < 30; ++it) {
        const std::size_t n = 2 + rng.next_below(7);
        const std::size_t k = 1 + rng.next_below(n);
        auto [pc, pk] = random_stacked_full_rank(k, 0, n, rng);
        auto basis = extend_to_basis(pc);
        CHECK(basis.size() == n);
        CHECK(rank(BitMatrix::from_rows(basis)) == n);
        for (std::size_t i = 0; i < k; ++i) CHECK(basis[i] == pc.row(i));
    }
}
