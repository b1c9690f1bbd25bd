#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qkd/bounds.hpp"

using namespace qkd;

namespace {

// Reference values computed ahead of the build with 50-digit arithmetic.
constexpr double kH2_011 = 0.49991595816452800;
constexpr double kH2_005 = 0.28639695711595613;
constexpr double kThreshold = 0.11002786443835955;
constexpr double kRate005 = 0.42720608576808774;

constexpr double kInfoZTotal[3] = {1923.9522775803709, 9231.3324771817639,
                                   0.073607285535928206};
constexpr double kBb84Total[3] = {8.6092558521727428e+47,
                                  3.0084785700032968e+25,
                                  0.44476105936291973};
constexpr double kEffTotal[3] = {6.3811189957967008e+143, 20937.767562840951,
                                 0.17626509296711814};
constexpr double kModTotal[3] = {7.4119286328170620e+95, 0.47081725469361981,
                                 4772.2156965405683};

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max(1e-300, std::fabs(b));
}

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(h2(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h2(0.0) == 0.0);
    CHECK(h2(1.0) == 0.0);
    CHECK(h2(0.11) == doctest::Approx(kH2_011).epsilon(1e-13));
    CHECK(h2(0.05) == doctest::Approx(kH2_005).epsilon(1e-13));
    CHECK_THROWS_AS(h2(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(h2(1.1), std::invalid_argument);
}

TEST_CASE("hoeffding partition bound") {
    // n = n' collapses to e^{-n eps^2 / 2}.
    CHECK(hoeffding_partition_bound(100, 100, 0.1) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(hoeffding_partition_bound(64, 64, 0.0) == 1.0);
    CHECK(hoeffding_partition_bound(100, 100, 0.1) ==
          doctest::Approx(0.60653065971263342).epsilon(1e-14));
    CHECK(hoeffding_partition_bound(20, 20, 0.2) ==
          doctest::Approx(0.67032004603563930).epsilon(1e-14));
}

TEST_CASE("hoeffding basis count bounds") {
    auto [b1, b2] = hoeffding_basis_count_bounds(100, 0.5);
    CHECK(b1 == doctest::Approx(std::exp(-12.5)).epsilon(1e-13));
    CHECK(b1 == b2);

    auto [c1, c2] = hoeffding_basis_count_bounds(100, 0.3);
    CHECK(c1 == doctest::Approx(2.2897348456455529e-11).epsilon(1e-13));
    CHECK(c2 == doctest::Approx(0.011108996538242306).epsilon(1e-13));

    auto [d1, d2] = hoeffding_basis_count_bounds(0, 0.3);
    CHECK(d1 == 1.0);
    CHECK(d2 == 1.0);
}

TEST_CASE("mc partition tail stays under the bound") {
    Rng rng(53);
    auto est = mc_partition_tail(20, 20, 0.2, 0.2, 4000, rng);
    CHECK(est.bound == doctest::Approx(std::exp(-0.4)).epsilon(1e-14));
    CHECK(est.max_estimate <=
          est.bound + (est.ci_at_max.high - est.ci_at_max.estimate));

    // The two degenerate sweep endpoints contribute nothing: w = 0 has no
    // errors anywhere; w = total forces |C_B|/n' = 1 > p.
    auto probe = mc_partition_tail(10, 10, 0.3, 0.3, 500, rng);
    CHECK(probe.worst_weight > 0);
    CHECK(probe.worst_weight < 20);
}

TEST_CASE("params validation") {
    CHECK_THROWS_AS(ProtocolParams::bb84(100, 60, 50, 0.05),
                    std::invalid_argument);  // r + m > n
    CHECK_THROWS_AS(ProtocolParams::bb84(100, 30, 20, 0.0),
                    std::invalid_argument);  // p_a > 0 required
    // n (p_a + eps) must be an integer.
    CHECK_THROWS_AS(ProtocolParams::bb84(512, 256, 64, 0.12, 0.07, 0.07),
                    std::invalid_argument);
    CHECK_NOTHROW(ProtocolParams::bb84(10000, 3500, 2000, 0.05, 0.02, 0.02));
    // p_a + eps <= 1/2.
    CHECK_THROWS_AS(ProtocolParams::bb84(100, 30, 20, 0.4, 0.2, 0.2),
                    std::invalid_argument);
    // Efficient: TEST quotas must stay below the basis-count floors.
    CHECK_THROWS_AS(
        ProtocolParams::efficient(100, 60, 10, 0.5, 30, 20, 0.05, {}, {}),
        std::invalid_argument);
    // Modified-efficient rejects t_x = 0.
    CHECK_THROWS_AS(ProtocolParams::modified_efficient(10, 0, 5, 5, 3, 2, 0.05),
                    std::invalid_argument);
}

TEST_CASE("nudge_eps_up yields the nearest valid slack") {
    const double eps = nudge_eps_up(512, 0.12, 0.07);
    CHECK(eps >= 0.07);
    const double t = 512.0 * (0.12 + eps);
    CHECK(std::fabs(t - std::round(t)) < 1e-9);
    CHECK_NOTHROW(ProtocolParams::bb84(512, 256, 64, 0.12, eps, eps));
    // Already-integral slack is unchanged.
    CHECK(nudge_eps_up(10000, 0.05, 0.02) ==
          doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("bound_bb84_info_z frozen evaluation points") {
    auto q0 = ProtocolParams::bb84_info_z(10000, 5000, 5000, 4000, 1500, 0.05,
                                          0.05, 0.02, 0.02);
    auto b0 = bound_bb84_info_z(q0);
    CHECK(rel_err(b0.total, kInfoZTotal[0]) <= 1e-12);
    CHECK(b0.key_rate == doctest::Approx(0.15).epsilon(1e-15));
    REQUIRE(b0.reliability_terms.size() == 2);
    REQUIRE(b0.secrecy_terms_under_radical.size() == 2);
    CHECK(rel_err(b0.reliability_terms[0].value, 0.41111229050718744) <= 1e-12);
    CHECK(rel_err(b0.reliability_terms[1].value, 2.6300728765474289e-103) <=
          1e-12);
    CHECK(rel_err(b0.secrecy_terms_under_radical[0].value,
                  0.41111229050718744) <= 1e-12);
    CHECK(rel_err(b0.secrecy_terms_under_radical[1].value,
                  8.0347052692187472e-254) <= 1e-12);

    auto q1 = ProtocolParams::bb84_info_z(20000, 10000, 5000, 6000, 5000, 0.03,
                                          0.06, 0.01, 0.02);
    CHECK(rel_err(bound_bb84_info_z(q1).total, kInfoZTotal[1]) <= 1e-12);

    auto q2 = ProtocolParams::bb84_info_z(100000, 50000, 50000, 35000, 30000,
                                          0.02, 0.02, 0.035, 0.035);
    CHECK(rel_err(bound_bb84_info_z(q2).total, kInfoZTotal[2]) <= 1e-12);
}

TEST_CASE("bound_bb84 frozen evaluation points") {
    auto q0 = ProtocolParams::bb84(10000, 3500, 2000, 0.05, 0.02, 0.02);
    CHECK(rel_err(bound_bb84(q0).total, kBb84Total[0]) <= 1e-12);

    auto q1 = ProtocolParams::bb84(2048, 1024, 256, 0.0625, 0.03125, 0.03125);
    CHECK(rel_err(bound_bb84(q1).total, kBb84Total[1]) <= 1e-12);

    auto q2 = ProtocolParams::bb84(100000, 30000, 40000, 0.02, 0.022, 0.022);
    CHECK(rel_err(bound_bb84(q2).total, kBb84Total[2]) <= 1e-12);
}

TEST_CASE("bound_efficient frozen evaluation points") {
    auto q0 = ProtocolParams::efficient(30000, 5000, 5000, 0.5, 10500, 4500,
                                        0.05, 0.02, 0.02);
    auto b0 = bound_efficient(q0);
    CHECK(rel_err(b0.total, kEffTotal[0]) <= 1e-12);
    CHECK(b0.reliability_terms.size() == 5);
    CHECK(b0.secrecy_terms_under_radical.size() == 5);

    auto q1 = ProtocolParams::efficient(40000, 10000, 10000, 0.4, 16000, 8000,
                                        0.03, 0.02, 0.01);
    CHECK(rel_err(bound_efficient(q1).total, kEffTotal[1]) <= 1e-12);

    auto q2 = ProtocolParams::efficient(1000000, 400000, 400000, 0.5, 420000,
                                        150000, 0.02, 0.06, 0.06);
    CHECK(rel_err(bound_efficient(q2).total, kEffTotal[2]) <= 1e-12);

    // p = 1/2 with n_z = n_x: the z/x terms pair up.
    CHECK(b0.reliability_terms[0].value ==
          doctest::Approx(b0.reliability_terms[2].value).epsilon(1e-14));
    CHECK(b0.reliability_terms[1].value ==
          doctest::Approx(b0.reliability_terms[3].value).epsilon(1e-14));
}

TEST_CASE("bound_modified_efficient frozen evaluation points") {
    auto q0 = ProtocolParams::modified_efficient(10000, 10000, 5000, 5000,
                                                 7000, 3000, 0.05, 0.02, 0.02);
    auto b0 = bound_modified_efficient(q0);
    CHECK(rel_err(b0.total, kModTotal[0]) <= 1e-12);

    auto q1 = ProtocolParams::modified_efficient(
        500000, 500000, 400000, 400000, 250000, 250000, 0.02, 0.012, 0.012);
    CHECK(rel_err(bound_modified_efficient(q1).total, kModTotal[1]) <= 1e-12);

    auto q2 = ProtocolParams::modified_efficient(5000, 15000, 2000, 6000, 9000,
                                                 2000, 0.06, 0.015, 0.0225);
    CHECK(rel_err(bound_modified_efficient(q2).total, kModTotal[2]) <= 1e-12);

    // t_z = t_x, n_z = n_x: the z/x terms pair up.
    CHECK(b0.reliability_terms[0].value ==
          doctest::Approx(b0.reliability_terms[1].value).epsilon(1e-14));
}

TEST_CASE("bb84 equals bb84-info-z under n_z = n_x = n, p_az = p_ax") {
    struct Point {
        std::size_t n, r, m;
        double pa, es, er;
    };
    const Point pts[] = {{1000, 400, 200, 0.05, 0.02, 0.03},
                         {5000, 1500, 1500, 0.03, 0.01, 0.01},
                         {2000, 800, 400, 0.04, 0.035, 0.01},
                         {800, 200, 100, 0.1, 0.025, 0.025},
                         {10000, 3500, 2000, 0.05, 0.02, 0.02}};
    for (const auto& p : pts) {
        auto qb = ProtocolParams::bb84(p.n, p.r, p.m, p.pa, p.es, p.er);
        auto qi = ProtocolParams::bb84_info_z(p.n, p.n, p.n, p.r, p.m, p.pa,
                                              p.pa, p.es, p.er);
        const double tb = bound_bb84(qb).total;
        const double ti = bound_bb84_info_z(qi).total;
        CHECK(rel_err(tb, ti) <= 1e-12);
    }
}

TEST_CASE("m = 0 drops the secrecy contribution") {
    auto q = ProtocolParams::bb84(10000, 3500, 0, 0.05, 0.02, 0.02);
    auto b = bound_bb84(q);
    double rel_sum = 0;
    for (const auto& t : b.reliability_terms) rel_sum += t.value;
    CHECK(b.total == doctest::Approx(rel_sum).epsilon(1e-14));
    CHECK(b.key_rate == 0.0);
}

TEST_CASE("exponent-zero reliability term equals one") {
    // H2(p_az + eps_rel) = r/n exactly: p_az + eps_rel = 1/2 with r = n
    // makes the code-failure term 2^0 = 1.
    const std::size_t n = 10000;
    auto q = ProtocolParams::bb84_info_z(n, 5000, 5000, n, 0, 0.48, 0.05, 0.02,
                                         0.02);
    auto b = bound_bb84_info_z(q);
    CHECK(b.reliability_terms[1].value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bound monotonicity spot checks") {
    // Nondecreasing in p_a and in m; nonincreasing in n at fixed ratios.
    auto total = [](std::size_t n, double pa, double mfrac) {
        auto q = ProtocolParams::bb84(
            n, static_cast<std::size_t>(0.3 * n),
            static_cast<std::size_t>(mfrac * n), pa,
            nudge_eps_up(n, pa, 0.02), nudge_eps_up(n, pa, 0.02));
        return bound_bb84(q).total;
    };
    CHECK(total(100000, 0.02, 0.4) <= total(100000, 0.025, 0.4));
    CHECK(total(100000, 0.02, 0.4) <= total(100000, 0.02, 0.45));
    CHECK(total(200000, 0.02, 0.4) <= total(100000, 0.02, 0.4));
}

TEST_CASE("log2_total survives underflowing totals") {
    // Deep secure regime: every term underflows double but the log does not.
    auto q = ProtocolParams::bb84(4000000, 1600000, 800000, 0.01, 0.04, 0.04);
    auto b = bound_bb84(q);
    CHECK(b.total == 0.0);
    CHECK(b.log2_total < -1000.0);
    CHECK(std::isfinite(b.log2_total));
}

TEST_CASE("asymptotic thresholds") {
    const double root = asymptotic_threshold(Variant::Bb84);
    CHECK(root == doctest::Approx(kThreshold).epsilon(1e-9));
    CHECK(std::fabs(2.0 * h2(root) - 1.0) <= 1e-8);
    CHECK(asymptotic_threshold(Variant::Efficient) ==
          doctest::Approx(kThreshold).epsilon(1e-9));

    // BB84-INFO-z: p_az = p_ax recovers the same 11% point.
    const double same = asymptotic_threshold(Variant::Bb84InfoZ, kThreshold);
    CHECK(same == doctest::Approx(kThreshold).epsilon(1e-7));
    CHECK(asymptotic_threshold(Variant::Bb84InfoZ, 0.0) ==
          doctest::Approx(0.5).epsilon(1e-9));
    CHECK(asymptotic_threshold(Variant::Bb84InfoZ, 0.03) ==
          doctest::Approx(0.24645327030817569).epsilon(1e-9));
    CHECK_THROWS_AS(asymptotic_threshold(Variant::Bb84InfoZ),
                    std::invalid_argument);
}

TEST_CASE("max key rate") {
    CHECK(max_key_rate(Variant::Bb84, 0.0, 0.0, 0.0) == 1.0);
    CHECK(max_key_rate(Variant::Bb84, 0.05, 0.0, 0.0) ==
          doctest::Approx(kRate005).epsilon(1e-13));
    CHECK(std::fabs(max_key_rate(Variant::Bb84, 0.11, 0.0, 0.0)) <= 2e-4);
    CHECK(max_key_rate(Variant::Bb84, 0.25, 0.2, 0.2) == 0.0);  // clamped
    CHECK(max_key_rate(Variant::Bb84InfoZ, 0.03, 0.06, 0.01, 0.02) ==
          doctest::Approx(0.34767939198382066).epsilon(1e-12));
}
