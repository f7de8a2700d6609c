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

#ifndef _STM_PAULI_H
#define _STM_PAULI_H

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stm {

/// Single-site Pauli encoded as (x bit) | (z bit) << 1.
enum class Pauli : uint8_t { I = 0, X = 1, Z = 2, Y = 3 };

inline char pauli_char(Pauli p) {
    return "IXZY"[static_cast<uint8_t>(p)];
}

/// Sparse unsigned Pauli product. Terms are kept sorted by site with no
/// identity entries, so equal operators compare equal.
class PauliString {
   public:
    PauliString() = default;

    static PauliString x_on(const std::vector<uint32_t> &sites) {
        return uniform(sites, Pauli::X);
    }
    static PauliString z_on(const std::vector<uint32_t> &sites) {
        return uniform(sites, Pauli::Z);
    }

    const std::vector<std::pair<uint32_t, Pauli>> &terms() const {
        return terms_;
    }
    size_t weight() const {
        return terms_.size();
    }
    bool empty() const {
        return terms_.empty();
    }

    Pauli at(uint32_t site) const {
        auto it = std::lower_bound(terms_.begin(), terms_.end(), site, [](const auto &t, uint32_t s) {
            return t.first < s;
        });
        return (it != terms_.end() && it->first == site) ? it->second : Pauli::I;
    }

    /// Multiplies in a single-site factor, ignoring phase.
    PauliString &mul(uint32_t site, Pauli p) {
        auto it = std::lower_bound(terms_.begin(), terms_.end(), site, [](const auto &t, uint32_t s) {
            return t.first < s;
        });
        if (it != terms_.end() && it->first == site) {
            it->second = static_cast<Pauli>(static_cast<uint8_t>(it->second) ^ static_cast<uint8_t>(p));
            if (it->second == Pauli::I) {
                terms_.erase(it);
            }
        } else if (p != Pauli::I) {
            terms_.insert(it, {site, p});
        }
        return *this;
    }

    PauliString &operator*=(const PauliString &other) {
        for (const auto &[site, p] : other.terms_) {
            mul(site, p);
        }
        return *this;
    }

    bool commutes_with(const PauliString &other) const {
        size_t i = 0, j = 0;
        bool anti = false;
        while (i < terms_.size() && j < other.terms_.size()) {
            if (terms_[i].first < other.terms_[j].first) {
                i++;
            } else if (terms_[i].first > other.terms_[j].first) {
                j++;
            } else {
                auto a = static_cast<uint8_t>(terms_[i].second);
                auto b = static_cast<uint8_t>(other.terms_[j].second);
                // Symplectic form x_a z_b + z_a x_b.
                anti ^= ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1));
                i++;
                j++;
            }
        }
        return !anti;
    }

    /// Sites carrying an X or Y factor.
    std::vector<uint32_t> x_sites() const {
        std::vector<uint32_t> out;
        for (const auto &[s, p] : terms_) {
            if (static_cast<uint8_t>(p) & 1) {
                out.push_back(s);
            }
        }
        return out;
    }
    std::vector<uint32_t> z_sites() const {
        std::vector<uint32_t> out;
        for (const auto &[s, p] : terms_) {
            if (static_cast<uint8_t>(p) & 2) {
                out.push_back(s);
            }
        }
        return out;
    }
    bool is_x_type() const {
        return std::all_of(terms_.begin(), terms_.end(), [](const auto &t) {
            return t.second == Pauli::X;
        });
    }

    /// Line format: space separated `X12 Z40 ...` in site order; "I" when empty.
    std::string str() const {
        if (terms_.empty()) {
            return "I";
        }
        std::string out;
        for (const auto &[s, p] : terms_) {
            if (!out.empty()) {
                out.push_back(' ');
            }
            out.push_back(pauli_char(p));
            out += std::to_string(s);
        }
        return out;
    }

    bool operator==(const PauliString &) const = default;

   private:
    static PauliString uniform(const std::vector<uint32_t> &sites, Pauli p) {
        PauliString out;
        for (auto s : sites) {
            out.mul(s, p);
        }
        return out;
    }

    std::vector<std::pair<uint32_t, Pauli>> terms_;
};

}  // namespace stm

#endif
