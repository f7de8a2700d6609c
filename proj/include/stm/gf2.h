// Copyright 2026 The spacetime-markov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef _STM_GF2_H
#define _STM_GF2_H

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stm {

inline size_t words_for_bits(size_t num_bits) {
    return (num_bits + 63) / 64;
}

/// A dense bit-packed vector over GF(2).
class BitRow {
   public:
    BitRow() = default;
    explicit BitRow(size_t num_bits) : num_bits_(num_bits), words_(words_for_bits(num_bits), 0) {
    }

    static BitRow from_support(size_t num_bits, std::span<const uint32_t> support) {
        BitRow r(num_bits);
        for (auto k : support) {
            r.flip(k);
        }
        return r;
    }

    size_t size() const {
        return num_bits_;
    }
    std::span<uint64_t> words() {
        return words_;
    }
    std::span<const uint64_t> words() const {
        return words_;
    }

    bool get(size_t k) const {
        return (words_[k >> 6] >> (k & 63)) & 1;
    }
    void set(size_t k, bool value) {
        uint64_t mask = uint64_t{1} << (k & 63);
        if (value) {
            words_[k >> 6] |= mask;
        } else {
            words_[k >> 6] &= ~mask;
        }
    }
    void flip(size_t k) {
        words_[k >> 6] ^= uint64_t{1} << (k & 63);
    }

    BitRow &operator^=(const BitRow &other) {
        check_same_size(other);
        for (size_t w = 0; w < words_.size(); w++) {
            words_[w] ^= other.words_[w];
        }
        return *this;
    }
    friend BitRow operator^(BitRow a, const BitRow &b) {
        a ^= b;
        return a;
    }

    size_t popcount() const {
        size_t total = 0;
        for (auto w : words_) {
            total += std::popcount(w);
        }
        return total;
    }
    bool none() const {
        for (auto w : words_) {
            if (w) {
                return false;
            }
        }
        return true;
    }

    /// Parity of the overlap with another row (the GF(2) inner product).
    bool dot(const BitRow &other) const {
        check_same_size(other);
        uint64_t acc = 0;
        for (size_t w = 0; w < words_.size(); w++) {
            acc ^= words_[w] & other.words_[w];
        }
        return std::popcount(acc) & 1;
    }

    std::vector<uint32_t> support() const {
        std::vector<uint32_t> out;
        for (size_t w = 0; w < words_.size(); w++) {
            uint64_t v = words_[w];
            while (v) {
                out.push_back(static_cast<uint32_t>(w * 64 + std::countr_zero(v)));
                v &= v - 1;
            }
        }
        return out;
    }

    /// Index of the lowest set bit, or size() if the row is zero.
    size_t first_one() const {
        for (size_t w = 0; w < words_.size(); w++) {
            if (words_[w]) {
                return w * 64 + std::countr_zero(words_[w]);
            }
        }
        return num_bits_;
    }

    std::string str() const {
        std::string s;
        s.reserve(num_bits_);
        for (size_t k = 0; k < num_bits_; k++) {
            s.push_back(get(k) ? '1' : '0');
        }
        return s;
    }

    bool operator==(const BitRow &other) const = default;

   private:
    void check_same_size(const BitRow &other) const {
        if (other.num_bits_ != num_bits_) {
            throw std::invalid_argument("BitRow size mismatch");
        }
    }

    size_t num_bits_ = 0;
    std::vector<uint64_t> words_;
};

/// A dense row-major binary matrix.
class BitMatrix {
   public:
    BitMatrix() = default;
    BitMatrix(size_t num_rows, size_t num_cols) : num_cols_(num_cols), rows_(num_rows, BitRow(num_cols)) {
    }

    size_t num_rows() const {
        return rows_.size();
    }
    size_t num_cols() const {
        return num_cols_;
    }

    BitRow &row(size_t r) {
        return rows_[r];
    }
    const BitRow &row(size_t r) const {
        return rows_[r];
    }
    const std::vector<BitRow> &rows() const {
        return rows_;
    }

    bool get(size_t r, size_t c) const {
        return rows_[r].get(c);
    }
    void set(size_t r, size_t c, bool v) {
        rows_[r].set(c, v);
    }

    void push_row(BitRow r) {
        if (rows_.empty() && num_cols_ == 0) {
            num_cols_ = r.size();
        }
        if (r.size() != num_cols_) {
            throw std::invalid_argument("BitMatrix row width mismatch");
        }
        rows_.push_back(std::move(r));
    }

    BitMatrix transposed() const {
        BitMatrix t(num_cols_, rows_.size());
        for (size_t r = 0; r < rows_.size(); r++) {
            for (auto c : rows_[r].support()) {
                t.set(c, r, true);
            }
        }
        return t;
    }

    /// GF(2) product this * other^T, i.e. entry (i, j) is row_i . other_row_j.
    BitMatrix mul_transpose(const BitMatrix &other) const {
        BitMatrix out(rows_.size(), other.num_rows());
        for (size_t i = 0; i < rows_.size(); i++) {
            for (size_t j = 0; j < other.num_rows(); j++) {
                out.set(i, j, rows_[i].dot(other.row(j)));
            }
        }
        return out;
    }

    bool is_zero() const {
        for (const auto &r : rows_) {
            if (!r.none()) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const BitMatrix &other) const = default;

   private:
    size_t num_cols_ = 0;
    std::vector<BitRow> rows_;
};

/// Reduces rows in place to reduced row echelon form. Returns the pivot columns.
inline std::vector<size_t> gf2_row_reduce(std::vector<BitRow> &rows) {
    std::vector<size_t> pivots;
    if (rows.empty()) {
        return pivots;
    }
    size_t num_cols = rows[0].size();
    size_t rank = 0;
    for (size_t col = 0; col < num_cols && rank < rows.size(); col++) {
        size_t found = rows.size();
        for (size_t r = rank; r < rows.size(); r++) {
            if (rows[r].get(col)) {
                found = r;
                break;
            }
        }
        if (found == rows.size()) {
            continue;
        }
        std::swap(rows[rank], rows[found]);
        for (size_t r = 0; r < rows.size(); r++) {
            if (r != rank && rows[r].get(col)) {
                rows[r] ^= rows[rank];
            }
        }
        pivots.push_back(col);
        rank++;
    }
    rows.resize(rank);
    return pivots;
}

inline size_t gf2_rank(std::vector<BitRow> rows) {
    return gf2_row_reduce(rows).size();
}

inline size_t gf2_rank(const BitMatrix &m) {
    return gf2_rank(m.rows());
}

/// True when target lies in the row space of rows.
inline bool gf2_in_row_space(const std::vector<BitRow> &rows, const BitRow &target) {
    auto with = rows;
    with.push_back(target);
    return gf2_rank(with) == gf2_rank(rows);
}

/// Basis of {x : rows . x = 0}, the right nullspace, as rows of length num_cols.
inline std::vector<BitRow> gf2_nullspace(std::vector<BitRow> rows, size_t num_cols) {
    auto pivots = gf2_row_reduce(rows);
    std::vector<bool> is_pivot(num_cols, false);
    for (auto p : pivots) {
        is_pivot[p] = true;
    }
    std::vector<BitRow> basis;
    for (size_t free_col = 0; free_col < num_cols; free_col++) {
        if (is_pivot[free_col]) {
            continue;
        }
        BitRow v(num_cols);
        v.set(free_col, true);
        for (size_t r = 0; r < pivots.size(); r++) {
            if (rows[r].get(free_col)) {
                v.set(pivots[r], true);
            }
        }
        basis.push_back(std::move(v));
    }
    return basis;
}

}  // namespace stm

#endif
