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

#include "stm/gf2.h"

#include <gtest/gtest.h>

#include <random>

using namespace stm;

namespace {

// Rank by enumerating the span: 2^rank distinct combinations.
size_t brute_rank(const std::vector<BitRow> &rows) {
    std::vector<std::string> seen;
    size_t r = rows.size();
    for (size_t mask = 0; mask < (size_t{1} << r); mask++) {
        BitRow acc(rows[0].size());
        for (size_t k = 0; k < r; k++) {
            if ((mask >> k) & 1) {
                acc ^= rows[k];
            }
        }
        seen.push_back(acc.str());
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    return static_cast<size_t>(std::countr_zero(seen.size()));
}

}  // namespace

TEST(gf2, bit_row_basics) {
    BitRow r(130);
    r.set(0, true);
    r.set(64, true);
    r.set(129, true);
    ASSERT_EQ(r.popcount(), 3);
    ASSERT_EQ(r.support(), (std::vector<uint32_t>{0, 64, 129}));
    ASSERT_EQ(r.first_one(), 0);
    r.flip(0);
    ASSERT_EQ(r.first_one(), 64);
    BitRow s = BitRow::from_support(130, std::vector<uint32_t>{64, 100});
    ASSERT_TRUE(r.dot(s));
    ASSERT_EQ((r ^ s).support(), (std::vector<uint32_t>{100, 129}));
    ASSERT_THROW(r ^= BitRow(3), std::invalid_argument);
}

TEST(gf2, rank_matches_span_enumeration) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; trial++) {
        size_t rows = 1 + rng() % 8, cols = 1 + rng() % 70;
        std::vector<BitRow> m;
        for (size_t r = 0; r < rows; r++) {
            BitRow row(cols);
            for (size_t c = 0; c < cols; c++) {
                row.set(c, rng() % 3 == 0);
            }
            m.push_back(row);
        }
        ASSERT_EQ(gf2_rank(m), brute_rank(m));
    }
}

TEST(gf2, nullspace_is_orthogonal_and_complete) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; trial++) {
        size_t rows = 1 + rng() % 6, cols = 2 + rng() % 12;
        std::vector<BitRow> m;
        for (size_t r = 0; r < rows; r++) {
            BitRow row(cols);
            for (size_t c = 0; c < cols; c++) {
                row.set(c, rng() & 1);
            }
            m.push_back(row);
        }
        auto basis = gf2_nullspace(m, cols);
        ASSERT_EQ(basis.size() + gf2_rank(m), cols);
        ASSERT_EQ(gf2_rank(basis), basis.size());
        for (const auto &v : basis) {
            for (const auto &row : m) {
                ASSERT_FALSE(v.dot(row));
            }
        }
    }
}

TEST(gf2, row_space_membership) {
    std::vector<BitRow> m{BitRow::from_support(4, std::vector<uint32_t>{0, 1}),
                          BitRow::from_support(4, std::vector<uint32_t>{1, 2})};
    ASSERT_TRUE(gf2_in_row_space(m, BitRow::from_support(4, std::vector<uint32_t>{0, 2})));
    ASSERT_FALSE(gf2_in_row_space(m, BitRow::from_support(4, std::vector<uint32_t>{3})));
}
