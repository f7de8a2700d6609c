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

#ifndef _STM_TABLEAU_H
#define _STM_TABLEAU_H

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stm/foliation.h"
#include "stm/gf2.h"
#include "stm/pauli.h"

namespace stm {

/// Aaronson-Gottesman stabilizer tableau. Rows [0, n) are destabilizers,
/// rows [n, 2n) stabilizers, row 2n is scratch space.
class Tableau {
   public:
    static constexpr size_t kMaxQubits = 4096;

    explicit Tableau(size_t n) : n_(n), x_(2 * n + 1, BitRow(n)), z_(2 * n + 1, BitRow(n)), r_(2 * n + 1, 0) {
        if (n > kMaxQubits) {
            throw std::invalid_argument("Tableau: " + std::to_string(n) + " qubits exceeds the verifier limit of " +
                                        std::to_string(kMaxQubits));
        }
        for (size_t k = 0; k < n; k++) {
            x_[k].set(k, true);
            z_[n + k].set(k, true);
        }
    }

    size_t num_qubits() const {
        return n_;
    }

    void h(size_t a) {
        for (size_t i = 0; i < 2 * n_; i++) {
            bool x = x_[i].get(a), z = z_[i].get(a);
            r_[i] ^= x & z;
            x_[i].set(a, z);
            z_[i].set(a, x);
        }
    }
    void s(size_t a) {
        for (size_t i = 0; i < 2 * n_; i++) {
            bool x = x_[i].get(a), z = z_[i].get(a);
            r_[i] ^= x & z;
            z_[i].set(a, z ^ x);
        }
    }
    void cx(size_t a, size_t b) {
        for (size_t i = 0; i < 2 * n_; i++) {
            bool xa = x_[i].get(a), za = z_[i].get(a), xb = x_[i].get(b), zb = z_[i].get(b);
            r_[i] ^= xa & zb & (xb ^ za ^ 1);
            x_[i].set(b, xb ^ xa);
            z_[i].set(a, za ^ zb);
        }
    }
    void cz(size_t a, size_t b) {
        h(b);
        cx(a, b);
        h(b);
    }
    /// Pauli Z on one qubit: flips the sign of every row with an X part there.
    void z(size_t a) {
        for (size_t i = 0; i < 2 * n_; i++) {
            r_[i] ^= x_[i].get(a);
        }
    }

    bool measure_z(size_t a, std::mt19937_64 &rng) {
        size_t p = 2 * n_;
        for (size_t i = n_; i < 2 * n_; i++) {
            if (x_[i].get(a)) {
                p = i;
                break;
            }
        }
        if (p < 2 * n_) {
            for (size_t i = 0; i < 2 * n_; i++) {
                if (i != p && x_[i].get(a)) {
                    rowsum(i, p);
                }
            }
            x_[p - n_] = x_[p];
            z_[p - n_] = z_[p];
            r_[p - n_] = r_[p];
            x_[p] = BitRow(n_);
            z_[p] = BitRow(n_);
            z_[p].set(a, true);
            r_[p] = rng() & 1;
            return r_[p];
        }
        clear_scratch();
        for (size_t i = 0; i < n_; i++) {
            if (x_[i].get(a)) {
                rowsum(2 * n_, i + n_);
            }
        }
        return r_[2 * n_];
    }

    bool measure_x(size_t a, std::mt19937_64 &rng) {
        h(a);
        bool m = measure_z(a, rng);
        h(a);
        return m;
    }

    /// +1 or -1 when the observable is in the stabilizer group up to sign, 0 when random.
    int expectation(const PauliString &obs) const {
        BitRow ox(n_), oz(n_);
        for (const auto &[site, p] : obs.terms()) {
            check_site(site);
            ox.set(site, static_cast<uint8_t>(p) & 1);
            oz.set(site, static_cast<uint8_t>(p) & 2);
        }
        auto anticommutes = [&](size_t row) {
            return x_[row].dot(oz) ^ z_[row].dot(ox);
        };
        for (size_t i = n_; i < 2 * n_; i++) {
            if (anticommutes(i)) {
                return 0;
            }
        }
        BitRow px(n_), pz(n_);
        uint8_t pr = 0;
        for (size_t i = 0; i < n_; i++) {
            if (anticommutes(i)) {
                rowsum_into(px, pz, pr, i + n_);
            }
        }
        if (!(px == ox && pz == oz)) {
            throw std::logic_error("Tableau::expectation: inconsistent tableau");
        }
        return pr ? -1 : +1;
    }

    /// Current stabilizer generators with their signs.
    std::vector<std::pair<PauliString, bool>> stabilizers() const {
        std::vector<std::pair<PauliString, bool>> out;
        for (size_t i = n_; i < 2 * n_; i++) {
            PauliString p;
            for (auto q : x_[i].support()) {
                p.mul(q, Pauli::X);
            }
            for (auto q : z_[i].support()) {
                p.mul(q, Pauli::Z);
            }
            out.push_back({std::move(p), r_[i] != 0});
        }
        return out;
    }

    bool operator==(const Tableau &) const = default;

   private:
    void check_site(size_t site) const {
        if (site >= n_) {
            throw std::out_of_range("Tableau: qubit " + std::to_string(site) + " out of range");
        }
    }
    void clear_scratch() {
        x_[2 * n_] = BitRow(n_);
        z_[2 * n_] = BitRow(n_);
        r_[2 * n_] = 0;
    }

    // Phase exponent (of i) picked up when multiplying single-qubit Paulis.
    static int g(bool x1, bool z1, bool x2, bool z2) {
        if (!x1 && !z1) {
            return 0;
        }
        if (x1 && z1) {
            return int(z2) - int(x2);
        }
        if (x1) {
            return int(z2) * (2 * int(x2) - 1);
        }
        return int(x2) * (1 - 2 * int(z2));
    }

    void rowsum(size_t hrow, size_t irow) {
        rowsum_into(x_[hrow], z_[hrow], r_[hrow], irow);
    }

    // (xh, zh, rh) <- (xh, zh, rh) * row irow.
    void rowsum_into(BitRow &xrow, BitRow &zrow, uint8_t &rh, size_t irow) const {
        int sum = 2 * rh + 2 * r_[irow];
        auto xi = x_[irow].words(), zi = z_[irow].words();
        auto xh = std::as_const(xrow).words(), zh = std::as_const(zrow).words();
        for (size_t w = 0; w < xi.size(); w++) {
            uint64_t active = xi[w] | zi[w];
            while (active) {
                int b = std::countr_zero(active);
                active &= active - 1;
                sum += g((xi[w] >> b) & 1, (zi[w] >> b) & 1, (xh[w] >> b) & 1, (zh[w] >> b) & 1);
            }
        }
        sum = ((sum % 4) + 4) % 4;
        rh = sum == 2;
        xrow ^= x_[irow];
        zrow ^= z_[irow];
    }

    size_t n_;
    std::vector<BitRow> x_, z_;
    std::vector<uint8_t> r_;
};

/// Graph state |G> = prod_{(a,b)} CZ_ab |+>^n.
inline Tableau init_graph_state(size_t n, const std::vector<std::pair<uint32_t, uint32_t>> &edges) {
    Tableau t(n);
    for (size_t q = 0; q < n; q++) {
        t.h(q);
    }
    for (auto [a, b] : edges) {
        t.cz(a, b);
    }
    return t;
}

/// Prepares the code state fixed by both check sectors and the framed logicals
/// on the given qubits, assuming they start in |0>.
inline void prepare_code_state(Tableau &t, const CssCode &code, const std::vector<uint32_t> &sites,
                               LogicalFrame frame) {
    // |0_L>: X-type checks from reduced echelon rows, H on each pivot then a
    // CNOT fan-out. |+_L> is the same with the sectors exchanged, then H on all.
    const auto &seed_rows = frame == LogicalFrame::z ? code.x_checks : code.z_checks;
    auto rows = seed_rows.rows();
    auto pivots = gf2_row_reduce(rows);
    for (size_t r = 0; r < pivots.size(); r++) {
        t.h(sites[pivots[r]]);
        for (auto q : rows[r].support()) {
            if (q != pivots[r]) {
                t.cx(sites[pivots[r]], sites[q]);
            }
        }
    }
    if (frame == LogicalFrame::x) {
        for (auto s : sites) {
            t.h(s);
        }
    }
}

/// Noiseless resource state with the input layer holding a code state.
inline Tableau init_graph_state(const ResourceState &rs, LogicalFrame frame = LogicalFrame::z) {
    Tableau t(rs.num_sites());
    std::vector<uint32_t> input(rs.code.n_qubits);
    for (size_t q = 0; q < rs.code.n_qubits; q++) {
        input[q] = rs.code_site(q, 0);
    }
    for (size_t s = 0; s < rs.num_sites(); s++) {
        if (!rs.in_input_layer(s)) {
            t.h(s);
        }
    }
    prepare_code_state(t, rs.code, input, frame);
    for (auto [a, b] : rs.cz_edges) {
        t.cz(a, b);
    }
    return t;
}

inline void apply_z(Tableau &t, const std::vector<uint32_t> &sites) {
    for (auto s : sites) {
        t.z(s);
    }
}

/// X-basis outcomes; bit 1 is the -1 eigenvalue. Unmeasured sites read 0.
struct MeasurementRecord {
    BitRow bits;
    BitRow measured;
};

inline MeasurementRecord measure_x_all(Tableau &t, const std::vector<uint32_t> &measured, std::mt19937_64 &rng) {
    MeasurementRecord rec{BitRow(t.num_qubits()), BitRow(t.num_qubits())};
    for (auto s : measured) {
        rec.measured.set(s, true);
        rec.bits.set(s, t.measure_x(s, rng));
    }
    return rec;
}

inline MeasurementRecord measure_x_all(Tableau &t, const ResourceState &rs, std::mt19937_64 &rng) {
    return measure_x_all(t, rs.measured_sites(), rng);
}

/// Parity of the outcomes over each X-type cell.
inline BitRow evaluate_detectors(const MeasurementRecord &rec, const std::vector<PauliString> &cells) {
    BitRow out(cells.size());
    for (size_t k = 0; k < cells.size(); k++) {
        if (!cells[k].is_x_type()) {
            throw std::invalid_argument("evaluate_detectors: cell " + std::to_string(k) + " is not X-type");
        }
        bool parity = false;
        for (const auto &[site, p] : cells[k].terms()) {
            if (site >= rec.measured.size() || !rec.measured.get(site)) {
                throw std::invalid_argument("evaluate_detectors: cell " + std::to_string(k) + " uses unmeasured site " +
                                            std::to_string(site));
            }
            parity ^= rec.bits.get(site);
        }
        out.set(k, parity);
    }
    return out;
}

}  // namespace stm

#endif
