#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd {

// Fixed-length bit vector over GF(2), packed 64 bits per word.
// Bit 0 is the leftmost character of the serialized form.
class BitString {
public:
    BitString() = default;

    explicit BitString(std::size_t len)
        : len_(len), words_((len + 63) / 64, 0) {}

    static BitString from_string(const std::string& s) {
        BitString b(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') {
                b.set(i, true);
            } else if (s[i] != '0') {
                throw std::invalid_argument("BitString: expected '0'/'1'");
            }
        }
        return b;
    }

    static BitString random(std::size_t len, Rng& rng) {
        BitString b(len);
        for (auto& w : b.words_) w = rng.next_u64();
        b.mask_tail();
        return b;
    }

    std::size_t size() const { return len_; }

    bool get(std::size_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void set(std::size_t i, bool v) {
        const std::uint64_t m = std::uint64_t(1) << (i & 63);
        if (v) {
            words_[i >> 6] |= m;
        } else {
            words_[i >> 6] &= ~m;
        }
    }

    std::size_t weight() const {
        std::size_t w = 0;
        for (auto x : words_) w += std::popcount(x);
        return w;
    }

    BitString operator^(const BitString& o) const {
        require_same_len(o);
        BitString r(len_);
        for (std::size_t i = 0; i < words_.size(); ++i)
            r.words_[i] = words_[i] ^ o.words_[i];
        return r;
    }

    BitString& operator^=(const BitString& o) {
        require_same_len(o);
        for (std::size_t i = 0; i < words_.size(); ++i)
            words_[i] ^= o.words_[i];
        return *this;
    }

    BitString operator~() const {
        BitString r(len_);
        for (std::size_t i = 0; i < words_.size(); ++i)
            r.words_[i] = ~words_[i];
        r.mask_tail();
        return r;
    }

    bool operator==(const BitString& o) const {
        return len_ == o.len_ && words_ == o.words_;
    }
    bool operator!=(const BitString& o) const { return !(*this == o); }
    bool operator<(const BitString& o) const {
        if (len_ != o.len_) return len_ < o.len_;
        for (std::size_t i = words_.size(); i-- > 0;)
            if (words_[i] != o.words_[i]) return words_[i] < o.words_[i];
        return false;
    }

    bool is_zero() const {
        for (auto x : words_) if (x) return false;
        return true;
    }

    // Parity of the AND with another string (inner product over GF(2)).
    bool dot(const BitString& o) const {
        require_same_len(o);
        std::uint64_t acc = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            acc ^= words_[i] & o.words_[i];
        return std::popcount(acc) & 1u;
    }

    std::size_t hamming_distance(const BitString& o) const {
        require_same_len(o);
        std::size_t d = 0;
        for (std::size_t i = 0; i < words_.size(); ++i)
            d += std::popcount(words_[i] ^ o.words_[i]);
        return d;
    }

    // Substring at the given (increasing) positions.
    BitString select(const std::vector<std::size_t>& positions) const {
        BitString r(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i)
            r.set(i, get(positions[i]));
        return r;
    }

    // Low n bits of `value`, bit i of the string = bit i of value.
    static BitString from_bits(std::uint64_t value, std::size_t len) {
        BitString b(len);
        if (len > 0) b.words_[0] = len >= 64 ? value : (value & ((std::uint64_t(1) << len) - 1));
        return b;
    }

    std::uint64_t to_bits() const {
        if (len_ > 64) throw std::length_error("BitString::to_bits: > 64 bits");
        return words_.empty() ? 0 : words_[0];
    }

    std::string to_string() const {
        std::string s(len_, '0');
        for (std::size_t i = 0; i < len_; ++i)
            if (get(i)) s[i] = '1';
        return s;
    }

private:
    void require_same_len(const BitString& o) const {
        if (len_ != o.len_)
            throw std::invalid_argument("BitString: length mismatch");
    }

    void mask_tail() {
        if (len_ % 64 != 0 && !words_.empty())
            words_.back() &= (std::uint64_t(1) << (len_ % 64)) - 1;
    }

    std::size_t len_ = 0;
    std::vector<std::uint64_t> words_;
};

inline std::size_t hamming_distance(const BitString& a, const BitString& b) {
    return a.hamming_distance(b);
}

// Dense GF(2) matrix stored as rows of BitString.
class BitMatrix {
public:
    BitMatrix() = default;

    BitMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows, BitString(cols)) {}

    static BitMatrix identity(std::size_t n) {
        BitMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.data_[i].set(i, true);
        return m;
    }

    static BitMatrix random(std::size_t rows, std::size_t cols, Rng& rng) {
        BitMatrix m(rows, cols);
        for (auto& r : m.data_) r = BitString::random(cols, rng);
        return m;
    }

    static BitMatrix from_rows(std::vector<BitString> rows) {
        BitMatrix m;
        m.rows_ = rows.size();
        m.cols_ = rows.empty() ? 0 : rows[0].size();
        for (const auto& r : rows)
            if (r.size() != m.cols_)
                throw std::invalid_argument("BitMatrix: ragged rows");
        m.data_ = std::move(rows);
        return m;
    }

    // Rows joined by ';', each row as a '0'/'1' string.
    static BitMatrix from_string(const std::string& s) {
        std::vector<BitString> rows;
        std::size_t start = 0;
        while (start <= s.size()) {
            std::size_t end = s.find(';', start);
            if (end == std::string::npos) end = s.size();
            rows.push_back(BitString::from_string(s.substr(start, end - start)));
            start = end + 1;
            if (end == s.size()) break;
        }
        return from_rows(std::move(rows));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    const BitString& row(std::size_t i) const { return data_[i]; }
    BitString& row(std::size_t i) { return data_[i]; }

    bool get(std::size_t r, std::size_t c) const { return data_[r].get(c); }
    void set(std::size_t r, std::size_t c, bool v) { data_[r].set(c, v); }

    bool operator==(const BitMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i) s += ';';
            s += data_[i].to_string();
        }
        return s;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<BitString> data_;
};

// x * M^T over GF(2): component i is the inner product of x with row i.
inline BitString mat_vec(const BitMatrix& m, const BitString& x) {
    if (x.size() != m.cols())
        throw std::invalid_argument("mat_vec: dimension mismatch");
    BitString r(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        r.set(i, m.row(i).dot(x));
    return r;
}

inline BitMatrix transpose(const BitMatrix& m) {
    BitMatrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.get(r, c)) t.set(c, r, true);
    return t;
}

// GF(2) row rank by elimination on a copy.
inline std::size_t rank(BitMatrix m) {
    std::size_t rk = 0;
    for (std::size_t col = 0; col < m.cols() && rk < m.rows(); ++col) {
        std::size_t pivot = rk;
        while (pivot < m.rows() && !m.get(pivot, col)) ++pivot;
        if (pivot == m.rows()) continue;
        std::swap(m.row(rk), m.row(pivot));
        for (std::size_t i = 0; i < m.rows(); ++i)
            if (i != rk && m.get(i, col)) m.row(i) ^= m.row(rk);
        ++rk;
    }
    return rk;
}

// Uniform (P_C, P_K) with the stacked (r+m) x n matrix of full rank,
// by rejection: draw uniform bits, accept iff rank = r+m.
inline std::pair<BitMatrix, BitMatrix> random_stacked_full_rank(
    std::size_t r, std::size_t m, std::size_t n, Rng& rng) {
    if (r + m > n)
        throw std::invalid_argument("random_stacked_full_rank: r + m > n");
    while (true) {
        BitMatrix stacked = BitMatrix::random(r + m, n, rng);
        if (rank(stacked) != r + m) continue;
        std::vector<BitString> pc, pk;
        for (std::size_t i = 0; i < r; ++i) pc.push_back(stacked.row(i));
        for (std::size_t i = r; i < r + m; ++i) pk.push_back(stacked.row(i));
        BitMatrix mpc = BitMatrix::from_rows(std::move(pc));
        BitMatrix mpk = BitMatrix::from_rows(std::move(pk));
        if (r == 0) mpc = BitMatrix(0, n);
        if (m == 0) mpk = BitMatrix(0, n);
        return {std::move(mpc), std::move(mpk)};
    }
}

// Basis of the kernel {x : M x^T = 0}, as rows. Standard RREF computation.
inline std::vector<BitString> kernel_basis(const BitMatrix& m) {
    const std::size_t n = m.cols();
    BitMatrix a(m);
    std::vector<std::size_t> pivot_col;
    std::size_t rk = 0;
    for (std::size_t col = 0; col < n && rk < a.rows(); ++col) {
        std::size_t pivot = rk;
        while (pivot < a.rows() && !a.get(pivot, col)) ++pivot;
        if (pivot == a.rows()) continue;
        std::swap(a.row(rk), a.row(pivot));
        for (std::size_t i = 0; i < a.rows(); ++i)
            if (i != rk && a.get(i, col)) a.row(i) ^= a.row(rk);
        pivot_col.push_back(col);
        ++rk;
    }
    std::vector<bool> is_pivot(n, false);
    for (auto c : pivot_col) is_pivot[c] = true;

    std::vector<BitString> basis;
    for (std::size_t free = 0; free < n; ++free) {
        if (is_pivot[free]) continue;
        BitString v(n);
        v.set(free, true);
        for (std::size_t i = 0; i < rk; ++i)
            if (a.get(i, free)) v.set(pivot_col[i], true);
        basis.push_back(std::move(v));
    }
    return basis;
}

// One solution z of z * M^T = y (empty optional if inconsistent).
inline std::optional<BitString> solve_transposed(const BitMatrix& m,
                                                 const BitString& y) {
    if (y.size() != m.rows())
        throw std::invalid_argument("solve_transposed: dimension mismatch");
    const std::size_t n = m.cols();
    // Augment each row with its target bit and eliminate.
    BitMatrix a(m.rows(), n + 1);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) a.set(i, j, m.get(i, j));
        a.set(i, n, y.get(i));
    }
    std::vector<std::size_t> pivot_col;
    std::size_t rk = 0;
    for (std::size_t col = 0; col < n && rk < a.rows(); ++col) {
        std::size_t pivot = rk;
        while (pivot < a.rows() && !a.get(pivot, col)) ++pivot;
        if (pivot == a.rows()) continue;
        std::swap(a.row(rk), a.row(pivot));
        for (std::size_t i = 0; i < a.rows(); ++i)
            if (i != rk && a.get(i, col)) a.row(i) ^= a.row(rk);
        pivot_col.push_back(col);
        ++rk;
    }
    for (std::size_t i = rk; i < a.rows(); ++i)
        if (a.get(i, n)) return std::nullopt;
    BitString z(n);
    for (std::size_t i = 0; i < rk; ++i)
        if (a.get(i, n)) z.set(pivot_col[i], true);
    return z;
}

// Extends the rows of a full-rank matrix to a basis v_1..v_n of F2^n.
// Returns all n vectors, the given rows first.
inline std::vector<BitString> extend_to_basis(const BitMatrix& m) {
    const std::size_t n = m.cols();
    std::vector<BitString> vectors;
    for (std::size_t i = 0; i < m.rows(); ++i) vectors.push_back(m.row(i));
    for (std::size_t e = 0; e < n && vectors.size() < n; ++e) {
        BitString cand(n);
        cand.set(e, true);
        std::vector<BitString> trial = vectors;
        trial.push_back(cand);
        if (rank(BitMatrix::from_rows(trial)) == trial.size())
            vectors.push_back(std::move(cand));
    }
    if (vectors.size() != n)
        throw std::invalid_argument("extend_to_basis: input rows dependent");
    return vectors;
}

}  // namespace qkd
