#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qkd/coding.hpp"
#include "qkd/gf2.hpp"
#include "qkd/protocol.hpp"
#include "qkd/rng.hpp"

namespace qkd {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Basis-index convention for the tiny-N lab: bit j of a basis index is the
// value of qubit j, so XOR masks and inner products of bitstrings act
// directly on indices.

inline int parity64(std::uint64_t x) { return std::popcount(x) & 1; }
inline double sign_of(std::uint64_t a, std::uint64_t b) {
    return parity64(a & b) ? -1.0 : 1.0;
}

// Eve's joint attack: a unitary on probe (x) N qubits, with an explicit
// initial probe state. The probe index is the major index.
struct AttackSpec {
    int n_qubits = 0;
    Eigen::Index probe_dim = 1;
    CMat unitary;
    CVec probe_init;

    Eigen::Index total_dim() const { return probe_dim << n_qubits; }

    void validate(double tol = 1e-10) const {
        if (n_qubits < 1 || n_qubits > 4)
            throw std::invalid_argument("AttackSpec: 1 <= N <= 4 required");
        if (unitary.rows() != total_dim() || unitary.cols() != total_dim())
            throw std::invalid_argument("AttackSpec: unitary dimension mismatch");
        if (probe_init.size() != probe_dim)
            throw std::invalid_argument("AttackSpec: probe_init dimension mismatch");
        if (std::abs(probe_init.norm() - 1.0) > tol)
            throw std::invalid_argument("AttackSpec: probe_init not normalized");
        const CMat gram = unitary.adjoint() * unitary;
        if ((gram - CMat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > tol)
            throw std::invalid_argument("AttackSpec: not unitary");
    }

    static AttackSpec identity(int n_qubits, Eigen::Index probe_dim) {
        AttackSpec a;
        a.n_qubits = n_qubits;
        a.probe_dim = probe_dim;
        a.unitary = CMat::Identity(a.total_dim(), a.total_dim());
        a.probe_init = CVec::Zero(probe_dim);
        a.probe_init[0] = 1.0;
        return a;
    }

    // Haar-random unitary on probe (x) qubits (Ginibre + QR, phases fixed).
    static AttackSpec random(int n_qubits, Eigen::Index probe_dim, Rng& rng) {
        AttackSpec a;
        a.n_qubits = n_qubits;
        a.probe_dim = probe_dim;
        const Eigen::Index d = a.total_dim();
        CMat g(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c)
                g(r, c) = Cplx(rng.next_normal(), rng.next_normal());
        Eigen::HouseholderQR<CMat> qr(g);
        CMat q = qr.householderQ();
        const CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index c = 0; c < d; ++c) {
            const Cplx rc = r(c, c);
            const Cplx phase = rc == Cplx(0, 0) ? Cplx(1, 0) : rc / std::abs(rc);
            q.col(c) *= phase;
        }
        a.unitary = std::move(q);
        a.probe_init = CVec::Zero(probe_dim);
        a.probe_init[0] = 1.0;
        return a;
    }
};

// |i>_b as an N-qubit product state. b_j = 1 uses the x basis:
// |0>_1 = (|0> + |1>)/sqrt(2), |1>_1 = (|0> - |1>)/sqrt(2).
inline CVec encode_state(const BitString& i, const BitString& b) {
    if (i.size() != b.size())
        throw std::invalid_argument("encode_state: length mismatch");
    const int N = static_cast<int>(i.size());
    const std::uint64_t im = i.to_bits();
    const Eigen::Index dim = Eigen::Index(1) << N;
    CVec v(dim);
    const double scale = std::pow(0.5, 0.5 * static_cast<double>(b.weight()));
    for (Eigen::Index q = 0; q < dim; ++q) {
        double amp = scale;
        bool zero = false;
        for (int j = 0; j < N; ++j) {
            const bool qj = (q >> j) & 1;
            const bool ij = (im >> j) & 1;
            if (!b.get(j)) {
                if (qj != ij) { zero = true; break; }
            } else if (qj && ij) {
                amp = -amp;
            }
        }
        v[q] = zero ? 0.0 : amp;
    }
    return v;
}

namespace detail {

// In-place Hadamard on qubit j of the qubit part, for every probe block.
inline void hadamard_qubit(CVec& v, Eigen::Index probe_dim, int N, int j) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const Eigen::Index qdim = Eigen::Index(1) << N;
    const Eigen::Index stride = Eigen::Index(1) << j;
    for (Eigen::Index p = 0; p < probe_dim; ++p) {
        const Eigen::Index base = p * qdim;
        for (Eigen::Index q = 0; q < qdim; ++q) {
            if (q & stride) continue;
            const Cplx a = v[base + q];
            const Cplx c = v[base + (q | stride)];
            v[base + q] = (a + c) * inv_sqrt2;
            v[base + (q | stride)] = (a - c) * inv_sqrt2;
        }
    }
}

inline void to_basis_b(CVec& v, Eigen::Index probe_dim, int N,
                       std::uint64_t b_mask) {
    for (int j = 0; j < N; ++j)
        if ((b_mask >> j) & 1) hadamard_qubit(v, probe_dim, N, j);
}

}  // namespace detail

// Probe components of U (probe_init (x) |i>_b) = sum_j |E'_{i,j}> |j>_b.
// Entry j is non-normalized; its squared norm is Pr(j | i, b).
inline std::vector<CVec> extract_E_prime(const AttackSpec& attack,
                                         const BitString& i,
                                         const BitString& b) {
    const int N = attack.n_qubits;
    if (static_cast<int>(i.size()) != N || static_cast<int>(b.size()) != N)
        throw std::invalid_argument("extract_E_prime: length mismatch");
    const Eigen::Index qdim = Eigen::Index(1) << N;
    CVec input(attack.total_dim());
    const CVec enc = encode_state(i, b);
    for (Eigen::Index p = 0; p < attack.probe_dim; ++p)
        input.segment(p * qdim, qdim) = attack.probe_init[p] * enc;
    CVec out = attack.unitary * input;
    detail::to_basis_b(out, attack.probe_dim, N, b.to_bits());
    std::vector<CVec> comps(qdim, CVec(attack.probe_dim));
    for (Eigen::Index j = 0; j < qdim; ++j)
        for (Eigen::Index p = 0; p < attack.probe_dim; ++p)
            comps[j][p] = out[p * qdim + j];
    return comps;
}

// Symmetrized attack: conjugation by S with an extra probe M of dimension
// 2^N prepared in |0_x>. S is the controlled XOR-with-sign
// S |q>|m> = (-1)^{q.m} |q xor m>|m>, the same matrix in both bases, and
// U^sym = (I_E (x) S^dagger)(U (x) I_M)(I_E (x) S). The new probe is
// E (x) M with M as the minor index.
inline AttackSpec symmetrize(const AttackSpec& attack) {
    const int N = attack.n_qubits;
    if (N > 4) throw std::invalid_argument("symmetrize: N <= 4 required");
    const Eigen::Index qdim = Eigen::Index(1) << N;
    const Eigen::Index pe = attack.probe_dim;
    AttackSpec sym;
    sym.n_qubits = N;
    sym.probe_dim = pe * qdim;
    sym.unitary = CMat::Zero(sym.total_dim(), sym.total_dim());
    // <e,q,m| U^sym |e',q',m> = (-1)^{(q xor q').m} <e, q xor m| U |e', q' xor m>
    for (Eigen::Index e = 0; e < pe; ++e)
        for (Eigen::Index e2 = 0; e2 < pe; ++e2)
            for (Eigen::Index m = 0; m < qdim; ++m)
                for (Eigen::Index q = 0; q < qdim; ++q)
                    for (Eigen::Index q2 = 0; q2 < qdim; ++q2) {
                        const Cplx u = attack.unitary(e * qdim + (q ^ m),
                                                      e2 * qdim + (q2 ^ m));
                        if (u == Cplx(0, 0)) continue;
                        const double sg = sign_of(q ^ q2, m);
                        sym.unitary((e * qdim + m) * qdim + q,
                                    (e2 * qdim + m) * qdim + q2) = sg * u;
                    }
    sym.probe_init = CVec::Zero(sym.probe_dim);
    const double amp = std::pow(0.5, 0.5 * static_cast<double>(N));
    for (Eigen::Index e = 0; e < pe; ++e)
        for (Eigen::Index m = 0; m < qdim; ++m)
            sym.probe_init[e * qdim + m] = attack.probe_init[e] * amp;
    return sym;
}

// Max deviation of the symmetrized components from
// 2^{-N/2} sum_m (-1)^{(i xor j).m} |E'_{i xor m, j xor m}> |m>.
inline double basic_symmetrization_error(const AttackSpec& attack,
                                         const AttackSpec& sym,
                                         const BitString& b) {
    const int N = attack.n_qubits;
    const Eigen::Index qdim = Eigen::Index(1) << N;
    const double scale = std::pow(0.5, 0.5 * static_cast<double>(N));
    std::vector<std::vector<CVec>> orig(qdim);
    for (Eigen::Index i = 0; i < qdim; ++i)
        orig[i] = extract_E_prime(attack, BitString::from_bits(i, N), b);
    double err = 0.0;
    for (Eigen::Index i = 0; i < qdim; ++i) {
        const auto sym_comps =
            extract_E_prime(sym, BitString::from_bits(i, N), b);
        for (Eigen::Index j = 0; j < qdim; ++j) {
            CVec expect = CVec::Zero(sym.probe_dim);
            for (Eigen::Index m = 0; m < qdim; ++m) {
                const CVec& base = orig[i ^ m][j ^ m];
                for (Eigen::Index e = 0; e < attack.probe_dim; ++e)
                    expect[e * qdim + m] =
                        scale * sign_of(i ^ j, m) * base[e];
            }
            err = std::max(err, (sym_comps[j] - expect).cwiseAbs().maxCoeff());
        }
    }
    return err;
}

namespace detail {

// Full-string index from INFO value, TEST value and the partition s.
inline std::uint64_t merge_info_test(std::uint64_t info_bits,
                                     std::uint64_t test_bits,
                                     const BitString& s) {
    std::uint64_t out = 0;
    std::size_t pi = 0, pt = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s.get(j)) {
            if ((info_bits >> pi) & 1) out |= std::uint64_t(1) << j;
            ++pi;
        } else {
            if ((test_bits >> pt) & 1) out |= std::uint64_t(1) << j;
            ++pt;
        }
    }
    return out;
}

}  // namespace detail

// Conditioned Eve states and their probabilities for a fixed (b, s, i_T,
// j_T): table[v][w] = |E_{i_I = v, j_I = w}> (normalized so the squared
// norm is Pr(j_I = w | i_I = v, i_T, j_T, b, s)).
struct ConditionedStates {
    std::size_t n = 0;
    std::vector<std::vector<CVec>> table;  // [2^n][2^n], probe-dim vectors
    std::vector<double> pr_jt_given_i;     // Pr(j_T | i_I = v, i_T, b, s)
    int skipped_branches = 0;              // branches with Pr(j_T | .) = 0
};

inline ConditionedStates condition_on_test(const AttackSpec& attack,
                                           const BitString& b,
                                           const BitString& s,
                                           const BitString& i_T,
                                           const BitString& j_T,
                                           double tol = 1e-13) {
    const int N = attack.n_qubits;
    if (static_cast<int>(b.size()) != N || static_cast<int>(s.size()) != N)
        throw std::invalid_argument("condition_on_test: length mismatch");
    const std::size_t n = s.weight();
    if (i_T.size() != s.size() - n || j_T.size() != s.size() - n)
        throw std::invalid_argument("condition_on_test: TEST length mismatch");
    ConditionedStates out;
    out.n = n;
    const std::uint64_t itm = i_T.to_bits(), jtm = j_T.to_bits();
    const std::uint64_t count = std::uint64_t(1) << n;
    out.table.resize(count);
    out.pr_jt_given_i.resize(count, 0.0);
    for (std::uint64_t v = 0; v < count; ++v) {
        const std::uint64_t i_full = detail::merge_info_test(v, itm, s);
        auto comps = extract_E_prime(attack, BitString::from_bits(i_full, N), b);
        double pr = 0.0;
        std::vector<CVec> row(count);
        for (std::uint64_t w = 0; w < count; ++w) {
            const std::uint64_t j_full = detail::merge_info_test(w, jtm, s);
            row[w] = std::move(comps[j_full]);
            pr += row[w].squaredNorm();
        }
        out.pr_jt_given_i[v] = pr;
        if (pr <= tol) {
            ++out.skipped_branches;
            continue;
        }
        const double inv = 1.0 / std::sqrt(pr);
        for (auto& vec : row) vec *= inv;
        out.table[v] = std::move(row);
    }
    return out;
}

// Fourier family eta_l = 2^{-n} sum_{i_I} (-1)^{i_I . l} |phi_{i_I}>, with
// phi_{i_I} = sum_{j_I} |E_{i_I, j_I}> |i_I xor j_I> the purification of
// Eve's conditioned state. d_l = ||eta_l||.
struct FourierEta {
    std::size_t n = 0;
    std::vector<CVec> eta;            // 2^n vectors of dim probe * 2^n
    std::vector<double> d;            // norms
    int skipped_branches = 0;
    double reconstruction_error = 0;  // max |phi - sum_l (-1)^{i.l} eta_l|
    double parseval_error = 0;        // |sum d^2 - 1|
    double max_cross_gram = 0;        // max |<eta_l, eta_l'>|, l != l'
};

inline FourierEta fourier_eta(const AttackSpec& attack, const BitString& b,
                              const BitString& s, const BitString& i_T,
                              const BitString& j_T) {
    const ConditionedStates cs = condition_on_test(attack, b, s, i_T, j_T);
    FourierEta out;
    out.n = cs.n;
    out.skipped_branches = cs.skipped_branches;
    if (cs.skipped_branches > 0) return out;
    const std::uint64_t count = std::uint64_t(1) << cs.n;
    const Eigen::Index phi_dim = attack.probe_dim * count;
    std::vector<CVec> phi(count, CVec::Zero(phi_dim));
    for (std::uint64_t v = 0; v < count; ++v)
        for (std::uint64_t w = 0; w < count; ++w) {
            const std::uint64_t x = v ^ w;  // register |i_I xor j_I>
            phi[v].segment(x * attack.probe_dim, attack.probe_dim) =
                cs.table[v][w];
        }
    const double scale = 1.0 / static_cast<double>(count);
    out.eta.assign(count, CVec::Zero(phi_dim));
    for (std::uint64_t l = 0; l < count; ++l) {
        for (std::uint64_t v = 0; v < count; ++v)
            out.eta[l] += sign_of(v, l) * phi[v];
        out.eta[l] *= scale;
    }
    out.d.resize(count);
    double sum_d2 = 0.0;
    for (std::uint64_t l = 0; l < count; ++l) {
        out.d[l] = out.eta[l].norm();
        sum_d2 += out.d[l] * out.d[l];
    }
    out.parseval_error = std::abs(sum_d2 - 1.0);
    for (std::uint64_t v = 0; v < count; ++v) {
        CVec rec = CVec::Zero(phi_dim);
        for (std::uint64_t l = 0; l < count; ++l)
            rec += sign_of(v, l) * out.eta[l];
        out.reconstruction_error = std::max(
            out.reconstruction_error, (rec - phi[v]).cwiseAbs().maxCoeff());
    }
    for (std::uint64_t l = 0; l < count; ++l)
        for (std::uint64_t l2 = l + 1; l2 < count; ++l2)
            out.max_cross_gram = std::max(
                out.max_cross_gram, std::abs(Cplx(out.eta[l].dot(out.eta[l2]))));
    return out;
}

// Pr[C_I = c_I | i_T, j_T, b_used, s] for a uniform INFO string: the
// distribution of the INFO error string given the published TEST values.
struct InfoErrorDistribution {
    std::vector<double> pr;  // indexed by c_I bits
    int skipped_branches = 0;
};

inline InfoErrorDistribution info_error_distribution(const AttackSpec& attack,
                                                     const BitString& b_used,
                                                     const BitString& s,
                                                     const BitString& i_T,
                                                     const BitString& j_T) {
    const int N = attack.n_qubits;
    const std::size_t n = s.weight();
    const std::uint64_t count = std::uint64_t(1) << n;
    const std::uint64_t itm = i_T.to_bits(), jtm = j_T.to_bits();
    InfoErrorDistribution out;
    out.pr.assign(count, 0.0);
    double total = 0.0;
    for (std::uint64_t v = 0; v < count; ++v) {
        const std::uint64_t i_full = detail::merge_info_test(v, itm, s);
        auto comps =
            extract_E_prime(attack, BitString::from_bits(i_full, N), b_used);
        for (std::uint64_t c = 0; c < count; ++c) {
            const std::uint64_t j_full = detail::merge_info_test(v ^ c, jtm, s);
            const double p = comps[j_full].squaredNorm();
            out.pr[c] += p;
            total += p;
        }
    }
    if (total <= 1e-13) {
        out.skipped_branches = 1;
        return out;
    }
    for (auto& p : out.pr) p /= total;
    return out;
}

// Eve states labelled by a classical register: block label -> matrix.
// Trace distance decomposes blockwise over orthogonal labels.
using BlockDiagState = std::map<std::size_t, CMat>;

inline double trace_distance(const CMat& rho, const CMat& sigma) {
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
        throw std::invalid_argument("trace_distance: dimension mismatch");
    CMat diff = rho - sigma;
    if ((diff - diff.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("trace_distance: input not Hermitian");
    diff = 0.5 * (diff + diff.adjoint().eval());  // kill eps-level asymmetry
    Eigen::SelfAdjointEigenSolver<CMat> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const BlockDiagState& rho,
                             const BlockDiagState& sigma) {
    double sum = 0.0;
    auto dim_of = [](const BlockDiagState& s) -> Eigen::Index {
        return s.empty() ? 0 : s.begin()->second.rows();
    };
    const Eigen::Index d = std::max(dim_of(rho), dim_of(sigma));
    const CMat zero = CMat::Zero(d, d);
    auto get = [&](const BlockDiagState& s, std::size_t key) -> const CMat& {
        auto it = s.find(key);
        return it == s.end() ? zero : it->second;
    };
    std::vector<std::size_t> keys;
    for (const auto& [k, v] : rho) keys.push_back(k);
    for (const auto& [k, v] : sigma)
        if (!rho.count(k)) keys.push_back(k);
    for (auto k : keys) sum += trace_distance(get(rho, k), get(sigma, k));
    return sum;
}

// All (P_C, P_K) pairs whose stacked matrix has full rank, each with the
// same probability. Exhaustive; needs (r+m) n small.
struct CodeDraws {
    std::vector<std::pair<BitMatrix, BitMatrix>> pairs;
    double weight = 0.0;  // 1 / pairs.size()
};

inline CodeDraws enumerate_stacked_full_rank(std::size_t r, std::size_t m,
                                             std::size_t n) {
    if ((r + m) * n > 20)
        throw std::invalid_argument("enumerate_stacked_full_rank: too large");
    CodeDraws out;
    const std::uint64_t total = std::uint64_t(1) << ((r + m) * n);
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        std::vector<BitString> rows;
        for (std::size_t row = 0; row < r + m; ++row)
            rows.push_back(
                BitString::from_bits((bits >> (row * n)) & ((1u << n) - 1), n));
        BitMatrix stacked = BitMatrix::from_rows(rows);
        if (rank(stacked) != r + m) continue;
        std::vector<BitString> pc(rows.begin(), rows.begin() + r);
        std::vector<BitString> pk(rows.begin() + r, rows.end());
        BitMatrix mpc = r == 0 ? BitMatrix(0, n) : BitMatrix::from_rows(pc);
        BitMatrix mpk = m == 0 ? BitMatrix(0, n) : BitMatrix::from_rows(pk);
        out.pairs.emplace_back(std::move(mpc), std::move(mpk));
    }
    if (out.pairs.empty())
        throw std::invalid_argument("enumerate_stacked_full_rank: r + m > n");
    out.weight = 1.0 / static_cast<double>(out.pairs.size());
    return out;
}

// Eve's averaged states per final key value, with the (P_C, P_K) label as
// an orthogonal block: rho_k = 2^{-(n-r-m)} sum over P_C, P_K and the
// strings i_I with syndrome xi and key k of Pr(P_C,P_K) rho^{i_I}.
inline std::map<std::uint64_t, BlockDiagState> rho_hat_keys(
    const AttackSpec& attack, const BitString& b, const BitString& s,
    const BitString& i_T, const BitString& j_T, const BitString& xi,
    const CodeDraws& draws) {
    const std::size_t n = s.weight();
    if (n > 3) throw std::invalid_argument("rho_hat_keys: n <= 3 required");
    const std::size_t r = xi.size();
    const std::size_t m = draws.pairs.at(0).second.rows();
    const ConditionedStates cs = condition_on_test(attack, b, s, i_T, j_T);
    if (cs.skipped_branches > 0)
        throw std::invalid_argument("rho_hat_keys: zero-probability branch");
    const std::uint64_t count = std::uint64_t(1) << n;
    // rho^{i_I} = sum_{j_I} |E_{i_I,j_I}><E_{i_I,j_I}| (trace 1).
    std::vector<CMat> rho_i(count,
                            CMat::Zero(attack.probe_dim, attack.probe_dim));
    for (std::uint64_t v = 0; v < count; ++v)
        for (std::uint64_t w = 0; w < count; ++w)
            rho_i[v] += cs.table[v][w] * cs.table[v][w].adjoint();
    const double norm = 1.0 / std::exp2(static_cast<double>(n - r - m));
    std::map<std::uint64_t, BlockDiagState> out;
    for (std::size_t d = 0; d < draws.pairs.size(); ++d) {
        const auto& [pc, pk] = draws.pairs[d];
        for (std::uint64_t v = 0; v < count; ++v) {
            const BitString iv = BitString::from_bits(v, n);
            if (mat_vec(pc, iv) != xi) continue;
            const std::uint64_t key = mat_vec(pk, iv).to_bits();
            auto& block = out[key][d];
            if (block.rows() == 0)
                block = CMat::Zero(attack.probe_dim, attack.probe_dim);
            block += norm * draws.weight * rho_i[v];
        }
    }
    return out;
}

// The rows of P_C then P_K extended to a basis v_1..v_n of F2^n, with the
// complementary spans V_r = <v_1..v_r> and V_r^c = <v_{r+1}..v_n> used by
// the information-disturbance analysis. F2^n = V_r^c (+) V_r.
struct SpanBasis {
    std::size_t n = 0, r = 0, m = 0;
    std::vector<BitString> vectors;  // v_1..v_n, linearly independent

    static SpanBasis from_matrices(const BitMatrix& pc, const BitMatrix& pk) {
        SpanBasis sb;
        sb.n = pc.cols() ? pc.cols() : pk.cols();
        sb.r = pc.rows();
        sb.m = pk.rows();
        std::vector<BitString> rows;
        for (std::size_t i = 0; i < pc.rows(); ++i) rows.push_back(pc.row(i));
        for (std::size_t i = 0; i < pk.rows(); ++i) rows.push_back(pk.row(i));
        BitMatrix stacked = rows.empty() ? BitMatrix(0, sb.n)
                                         : BitMatrix::from_rows(rows);
        if (rank(stacked) != sb.r + sb.m)
            throw std::invalid_argument("SpanBasis: rows dependent");
        sb.vectors = rows.empty()
                         ? extend_to_basis(BitMatrix(0, sb.n))
                         : extend_to_basis(stacked);
        return sb;
    }

    // Unique decomposition ell = x (+) y with x in V_r^c, y in V_r.
    std::pair<BitString, BitString> decompose(const BitString& ell) const {
        const BitMatrix basis_t = transpose(BitMatrix::from_rows(vectors));
        const auto coords = solve_transposed(basis_t, ell);
        if (!coords) throw std::logic_error("SpanBasis: not a basis");
        BitString x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!coords->get(i)) continue;
            (i < r ? y : x) ^= vectors[i];
        }
        return {std::move(x), std::move(y)};
    }
};

struct SymmetryChecks {
    double basic_lemma = 0.0;          // symmetrized components vs formula
    double probs_c = 0.0;              // Pr^sym(c | b, s) vs Pr(c | b, s)
    double test_err_invariance = 0.0;  // Pr^sym(j_T | i_T, b, s) vs INFO flips
    double info_uniform = 0.0;         // Pr^sym(i_I | i_T, j_T, b, s) vs 2^-n
    double xi_uniform = 0.0;           // Pr^sym(xi | ..., P_C, P_K) vs 2^-r
    double i_given_xi_uniform = 0.0;   // Pr^sym(i_I | ..., xi, P_C) vs 2^-(n-r)
    double eta_orthogonality = 0.0;
    double parseval = 0.0;
    double reconstruction = 0.0;

    double max() const {
        double v = basic_lemma;
        for (double x : {probs_c, test_err_invariance, info_uniform, xi_uniform,
                         i_given_xi_uniform, eta_orthogonality, parseval,
                         reconstruction})
            v = std::max(v, x);
        return v;
    }
};

// Numerical verification of the symmetrization identities for one attack
// and one (b, s, i_T, j_T) configuration.
inline SymmetryChecks check_symmetrization(const AttackSpec& attack,
                                           const AttackSpec& sym,
                                           const BitString& b,
                                           const BitString& s,
                                           const BitString& i_T,
                                           const BitString& j_T,
                                           const BitMatrix& pc,
                                           const BitMatrix& pk) {
    SymmetryChecks out;
    const int N = attack.n_qubits;
    const Eigen::Index qdim = Eigen::Index(1) << N;
    const std::size_t n = s.weight();
    const std::uint64_t count = std::uint64_t(1) << n;

    out.basic_lemma = basic_symmetrization_error(attack, sym, b);

    // Pr(c | b, s) = 2^-N sum_i || E'_{i, i xor c} ||^2, original vs sym.
    auto error_string_dist = [&](const AttackSpec& a) {
        std::vector<double> pr(qdim, 0.0);
        for (Eigen::Index i = 0; i < qdim; ++i) {
            auto comps = extract_E_prime(a, BitString::from_bits(i, N), b);
            for (Eigen::Index c = 0; c < qdim; ++c)
                pr[c] += comps[i ^ c].squaredNorm() / static_cast<double>(qdim);
        }
        return pr;
    };
    const auto pr_orig = error_string_dist(attack);
    const auto pr_sym = error_string_dist(sym);
    for (Eigen::Index c = 0; c < qdim; ++c)
        out.probs_c = std::max(out.probs_c, std::abs(pr_orig[c] - pr_sym[c]));

    // Pr^sym(j_T | i_T, b, s) must not change when INFO-bit bases flip.
    const std::uint64_t itm = i_T.to_bits(), jtm = j_T.to_bits();
    const std::uint64_t tcount = std::uint64_t(1) << (N - n);
    auto test_marginal = [&](const BitString& basis) {
        std::vector<double> pr(tcount, 0.0);
        for (std::uint64_t v = 0; v < count; ++v) {
            const std::uint64_t i_full = detail::merge_info_test(v, itm, s);
            auto comps =
                extract_E_prime(sym, BitString::from_bits(i_full, N), basis);
            for (std::uint64_t jt = 0; jt < tcount; ++jt)
                for (std::uint64_t w = 0; w < count; ++w)
                    pr[jt] += comps[detail::merge_info_test(w, jt, s)]
                                  .squaredNorm() /
                              static_cast<double>(count);
        }
        return pr;
    };
    const auto base_marginal = test_marginal(b);
    for (std::uint64_t mask = 1; mask < count; ++mask) {
        BitString flipped = b;
        std::size_t pi = 0;
        for (std::size_t jx = 0; jx < s.size(); ++jx) {
            if (!s.get(jx)) continue;
            if ((mask >> pi) & 1) flipped.set(jx, !flipped.get(jx));
            ++pi;
        }
        const auto pr = test_marginal(flipped);
        for (std::uint64_t jt = 0; jt < tcount; ++jt)
            out.test_err_invariance = std::max(
                out.test_err_invariance, std::abs(pr[jt] - base_marginal[jt]));
    }

    // Pr^sym(i_I | i_T, j_T, b, s) = 2^-n, via Bayes with the uniform prior.
    const ConditionedStates cs = condition_on_test(sym, b, s, i_T, j_T);
    if (cs.skipped_branches == 0) {
        double total = 0.0;
        for (std::uint64_t v = 0; v < count; ++v) total += cs.pr_jt_given_i[v];
        for (std::uint64_t v = 0; v < count; ++v)
            out.info_uniform =
                std::max(out.info_uniform,
                         std::abs(cs.pr_jt_given_i[v] / total -
                                  1.0 / static_cast<double>(count)));

        // Syndrome uniformity for the given (P_C, P_K).
        const std::size_t r = pc.rows();
        std::vector<double> pr_xi(std::size_t(1) << r, 0.0);
        for (std::uint64_t v = 0; v < count; ++v) {
            const BitString iv = BitString::from_bits(v, n);
            pr_xi[mat_vec(pc, iv).to_bits()] += cs.pr_jt_given_i[v] / total;
        }
        for (double p : pr_xi)
            out.xi_uniform = std::max(
                out.xi_uniform, std::abs(p - 1.0 / static_cast<double>(pr_xi.size())));
        for (std::uint64_t xi = 0; xi < pr_xi.size(); ++xi) {
            if (pr_xi[xi] <= 0) continue;
            for (std::uint64_t v = 0; v < count; ++v) {
                const BitString iv = BitString::from_bits(v, n);
                if (mat_vec(pc, iv).to_bits() != xi) continue;
                const double cond = (cs.pr_jt_given_i[v] / total) / pr_xi[xi];
                out.i_given_xi_uniform = std::max(
                    out.i_given_xi_uniform,
                    std::abs(cond - std::exp2(-static_cast<double>(n - r))));
            }
        }
    }

    const FourierEta fe = fourier_eta(sym, b, s, i_T, j_T);
    if (fe.skipped_branches == 0) {
        out.eta_orthogonality = fe.max_cross_gram;
        out.parseval = fe.parseval_error;
        out.reconstruction = fe.reconstruction_error;
    }
    (void)pk;
    return out;
}

struct InfoDisturbanceReport {
    double lhs = 0.0;   // (1/2) tr |rho_0 - rho_1|
    double rhs = 0.0;   // 2 sqrt(inverted mass + formula term)
    double margin = 0.0;
    bool holds = false;
    std::size_t t = 0;
    double inverted_mass = 0.0;    // Pr_inv[|C_I| >= t | i_T, j_T, b, s]
    double formula_term = 0.0;     // 2^{n [H2(t/n) - (n-r-1)/n]}
    double lemma_dsq_error = 0.0;  // max |d_l^2 - Pr_inv[C_I = l]|
    int skipped_branches = 0;
};

// Checks the 1-bit-key information-disturbance bound for one symmetrized
// attack: trace distance between Eve's two key states against the
// disturbance the same attack would cause with INFO bases inverted.
inline InfoDisturbanceReport verify_info_disturbance(
    const AttackSpec& attack, const BitString& b, const BitString& s,
    const BitString& i_T, const BitString& j_T, const BitString& xi,
    std::size_t t) {
    const std::size_t n = s.weight();
    const std::size_t r = xi.size();
    if (n > 3) throw std::invalid_argument("verify_info_disturbance: n <= 3");
    if (2 * t > n) throw std::invalid_argument("verify_info_disturbance: t <= n/2");
    if (r + 1 > n) throw std::invalid_argument("verify_info_disturbance: r + 1 <= n");

    InfoDisturbanceReport rep;
    rep.t = t;
    const AttackSpec sym = symmetrize(attack);

    const CodeDraws draws = enumerate_stacked_full_rank(r, 1, n);
    auto rho = rho_hat_keys(sym, b, s, i_T, j_T, xi, draws);
    rep.lhs = trace_distance(rho[0], rho[1]);

    const BitString b0 = b ^ s;
    const InfoErrorDistribution inv =
        info_error_distribution(sym, b0, s, i_T, j_T);
    rep.skipped_branches = inv.skipped_branches;
    if (inv.skipped_branches > 0) return rep;
    for (std::uint64_t c = 0; c < inv.pr.size(); ++c)
        if (std::popcount(c) >= static_cast<int>(t)) rep.inverted_mass += inv.pr[c];

    const FourierEta fe = fourier_eta(sym, b, s, i_T, j_T);
    if (fe.skipped_branches == 0)
        for (std::uint64_t c = 0; c < inv.pr.size(); ++c)
            rep.lemma_dsq_error =
                std::max(rep.lemma_dsq_error,
                         std::abs(fe.d[c] * fe.d[c] - inv.pr[c]));

    const long double nn = static_cast<long double>(n);
    rep.formula_term = static_cast<double>(std::exp2(
        nn * (h2l(static_cast<long double>(t) / nn) - (nn - r - 1.0L) / nn)));
    rep.rhs = 2.0 * std::sqrt(rep.inverted_mass + rep.formula_term);
    rep.margin = rep.rhs - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs + 1e-9;
    return rep;
}

// Tiny standard-protocol instance for exact composable-security checks.
struct TinyParams {
    std::size_t N = 2;
    std::size_t n = 1;
    std::size_t r = 0;
    std::size_t m = 1;
    double p_a = 0.25;  // TEST threshold: |c_T| <= p_a (N - n)
};

struct ComposableReport {
    double lhs = 0.0;  // (1/2) tr |rho_ABE - rho_U (x) rho_E|
    double rhs = 0.0;  // at the best t
    double margin = 0.0;
    bool holds = false;
    std::size_t best_t = 0;
    double pr_mismatch = 0.0;  // Pr[(k != k^B) and (T = 1)]
    double pr_pass = 0.0;      // tr rho_ABE
};

// Builds rho_ABE, rho_U and rho_E exactly (classical registers as
// orthogonal labels, aborted branches contributing the zero operator) and
// evaluates the composable-security bound by full enumeration over i, b,
// s, (P_C, P_K) and Bob's outcomes.
inline ComposableReport verify_composable_bound(const AttackSpec& attack,
                                                const TinyParams& tiny) {
    const std::size_t N = tiny.N, n = tiny.n, r = tiny.r, m = tiny.m;
    if (static_cast<int>(N) != attack.n_qubits)
        throw std::invalid_argument("verify_composable_bound: N mismatch");
    if (N > 3 || n > 2 || m > 2 || r + m > n)
        throw std::invalid_argument("verify_composable_bound: size limits");
    const Eigen::Index qdim = Eigen::Index(1) << N;
    const std::uint64_t icount = std::uint64_t(1) << n;      // INFO strings
    const std::uint64_t tcount = std::uint64_t(1) << (N - n); // TEST strings
    const std::uint64_t kcount = std::uint64_t(1) << m;
    const std::uint64_t kb_fail = kcount;  // Bob's "decode failed" label

    // All s of weight n, uniform; all b, uniform (standard protocol).
    std::vector<BitString> s_choices;
    for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << N); ++bits)
        if (std::popcount(bits) == static_cast<int>(n))
            s_choices.push_back(BitString::from_bits(bits, N));
    const double pr_bs =
        1.0 / (static_cast<double>(qdim) * static_cast<double>(s_choices.size()));
    const double pr_i = 1.0 / static_cast<double>(qdim);

    const CodeDraws draws = enumerate_stacked_full_rank(r, m, n);

    auto test_passes = [&](std::uint64_t c_t) {
        return static_cast<double>(std::popcount(c_t)) <=
               tiny.p_a * static_cast<double>(N - n) + 1e-12;
    };

    // Block key: (k, kb, i_T, j_T, b, s, xi, draw) packed little-endian.
    auto pack = [&](std::uint64_t k, std::uint64_t kb, std::uint64_t it,
                    std::uint64_t jt, std::uint64_t bm, std::size_t si,
                    std::uint64_t xi, std::size_t d) {
        std::size_t key = k;
        key = key * (kcount + 1) + kb;
        key = key * tcount + it;
        key = key * tcount + jt;
        key = key * qdim + bm;
        key = key * s_choices.size() + si;
        key = key * (std::uint64_t(1) << r) + xi;
        key = key * draws.pairs.size() + d;
        return key;
    };

    ComposableReport rep;
    BlockDiagState rho_abe;
    std::map<std::size_t, CMat> rho_e;  // labels without (k, kb)
    auto pack_c = [&](std::uint64_t it, std::uint64_t jt, std::uint64_t bm,
                      std::size_t si, std::uint64_t xi, std::size_t d) {
        std::size_t key = it;
        key = key * tcount + jt;
        key = key * qdim + bm;
        key = key * s_choices.size() + si;
        key = key * (std::uint64_t(1) << r) + xi;
        key = key * draws.pairs.size() + d;
        return key;
    };

    std::vector<double> pr_inv_by_weight(n + 1, 0.0);

    for (std::uint64_t bm = 0; bm < static_cast<std::uint64_t>(qdim); ++bm) {
        const BitString b = BitString::from_bits(bm, N);
        for (std::size_t si = 0; si < s_choices.size(); ++si) {
            const BitString& s = s_choices[si];
            std::vector<std::size_t> info_pos, test_pos;
            for (std::size_t jx = 0; jx < N; ++jx)
                (s.get(jx) ? info_pos : test_pos).push_back(jx);

            // Real-basis attack components for every i.
            std::vector<std::vector<CVec>> comps(qdim);
            for (Eigen::Index iv = 0; iv < qdim; ++iv)
                comps[iv] =
                    extract_E_prime(attack, BitString::from_bits(iv, N), b);
            // Inverted-INFO-basis components for the secrecy side.
            const BitString b0 = b ^ s;
            for (Eigen::Index iv = 0; iv < qdim; ++iv) {
                auto inv_comps =
                    extract_E_prime(attack, BitString::from_bits(iv, N), b0);
                const BitString ibits = BitString::from_bits(iv, N);
                const std::uint64_t i_t = ibits.select(test_pos).to_bits();
                const std::uint64_t i_i = ibits.select(info_pos).to_bits();
                for (Eigen::Index jv = 0; jv < qdim; ++jv) {
                    const BitString jbits = BitString::from_bits(jv, N);
                    const std::uint64_t j_t = jbits.select(test_pos).to_bits();
                    if (!test_passes(i_t ^ j_t)) continue;
                    const std::uint64_t c_i =
                        i_i ^ jbits.select(info_pos).to_bits();
                    pr_inv_by_weight[std::popcount(c_i)] +=
                        pr_i * pr_bs * inv_comps[jv].squaredNorm();
                }
            }

            for (std::size_t d = 0; d < draws.pairs.size(); ++d) {
                const auto& [pc, pk] = draws.pairs[d];
                const LinearCode code(pc.rows() == 0
                                          ? BitMatrix(0, n)
                                          : pc);
                for (Eigen::Index iv = 0; iv < qdim; ++iv) {
                    const BitString ibits = BitString::from_bits(iv, N);
                    const BitString i_I = ibits.select(info_pos);
                    const std::uint64_t i_t = ibits.select(test_pos).to_bits();
                    const BitString xi = mat_vec(pc, i_I);
                    const std::uint64_t k = mat_vec(pk, i_I).to_bits();
                    for (Eigen::Index jv = 0; jv < qdim; ++jv) {
                        const BitString jbits = BitString::from_bits(jv, N);
                        const std::uint64_t j_t =
                            jbits.select(test_pos).to_bits();
                        if (!test_passes(i_t ^ j_t)) continue;
                        const CVec& amp = comps[iv][jv];
                        const double p = amp.squaredNorm();
                        if (p <= 0.0) continue;
                        const double coeff = pr_i * pr_bs * draws.weight;
                        const BitString j_I = jbits.select(info_pos);
                        const DecodeOutcome dec = coset_decode(code, xi, j_I);
                        const std::uint64_t kb =
                            dec.decoded() ? mat_vec(pk, dec.word).to_bits()
                                          : kb_fail;
                        rep.pr_pass += coeff * p;
                        if (kb != k) rep.pr_mismatch += coeff * p;
                        const std::size_t key =
                            pack(k, kb, i_t, j_t, bm, si, xi.to_bits(), d);
                        auto& blk = rho_abe[key];
                        if (blk.rows() == 0)
                            blk = CMat::Zero(attack.probe_dim, attack.probe_dim);
                        blk += coeff * (amp * amp.adjoint());
                        const std::size_t ckey =
                            pack_c(i_t, j_t, bm, si, xi.to_bits(), d);
                        auto& eblk = rho_e[ckey];
                        if (eblk.rows() == 0)
                            eblk = CMat::Zero(attack.probe_dim, attack.probe_dim);
                        eblk += coeff * (amp * amp.adjoint());
                    }
                }
            }
        }
    }

    // rho_U (x) rho_E has blocks (k, k, c-label) = rho_E[c] / 2^m.
    BlockDiagState ideal;
    for (const auto& [ckey, mat] : rho_e)
        for (std::uint64_t k = 0; k < kcount; ++k) {
            // Rebuild the packed key with kb = k.
            // pack() consumed fields in order; recompute from parts.
            std::size_t rest = ckey;
            const std::size_t d = rest % draws.pairs.size();
            rest /= draws.pairs.size();
            const std::uint64_t xi = rest % (std::uint64_t(1) << r);
            rest /= (std::uint64_t(1) << r);
            const std::size_t si = rest % s_choices.size();
            rest /= s_choices.size();
            const std::uint64_t bm = rest % qdim;
            rest /= qdim;
            const std::uint64_t jt = rest % tcount;
            rest /= tcount;
            const std::uint64_t it = rest % tcount;
            ideal[pack(k, k, it, jt, bm, si, xi, d)] =
                mat / static_cast<double>(kcount);
        }

    rep.lhs = trace_distance(rho_abe, ideal);

    // Suffix sums give Pr_inv[(|C_I| >= t) and (T = 1)].
    std::vector<double> pr_inv_ge(n + 2, 0.0);
    for (std::size_t w = n + 1; w-- > 0;)
        pr_inv_ge[w] = (w <= n ? pr_inv_by_weight[w] : 0.0) + pr_inv_ge[w + 1];

    rep.rhs = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; 2 * t <= n; ++t) {
        const long double nn = static_cast<long double>(n);
        const double formula = static_cast<double>(std::exp2(
            nn * (h2l(static_cast<long double>(t) / nn) -
                  (nn - static_cast<long double>(r + m)) / nn)));
        const double rhs_t =
            rep.pr_mismatch +
            2.0 * static_cast<double>(m) * std::sqrt(pr_inv_ge[t] + formula);
        if (rhs_t < rep.rhs) {
            rep.rhs = rhs_t;
            rep.best_t = t;
        }
    }
    rep.margin = rep.rhs - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs + 1e-9;
    return rep;
}

}  // namespace qkd
