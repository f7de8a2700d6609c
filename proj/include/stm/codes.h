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

#ifndef _STM_CODES_H
#define _STM_CODES_H

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stm/gf2.h"

namespace stm {

/// Integer lattice position. Unused trailing axes are zero.
using Coord = std::array<int32_t, 2>;

/// Placement of qubits and checks on a periodic lattice.
///
/// Positions use a doubled lattice so that qubits and both check types sit on
/// integer points: on the toric code, vertices are (even, even), plaquettes are
/// (odd, odd) and edges are mixed. Every spatial axis is periodic with the
/// given extent.
struct CodeGeometry {
    size_t dims = 1;
    Coord extent{0, 0};
    std::vector<Coord> qubits;
    std::vector<Coord> z_checks;
    std::vector<Coord> x_checks;

    bool operator==(const CodeGeometry &) const = default;
};

struct CssCode {
    std::string family;
    size_t size = 0;
    size_t n_qubits = 0;
    BitMatrix z_checks;
    BitMatrix x_checks;
    BitMatrix z_logicals;
    BitMatrix x_logicals;
    CodeGeometry geometry;

    size_t num_z_checks() const {
        return z_checks.num_rows();
    }
    size_t num_x_checks() const {
        return x_checks.num_rows();
    }
    size_t num_checks() const {
        return num_z_checks() + num_x_checks();
    }
    /// Checks are numbered with all Z-type checks first.
    bool is_z_check(size_t check) const {
        return check < num_z_checks();
    }
    const BitRow &check_row(size_t check) const {
        return is_z_check(check) ? z_checks.row(check) : x_checks.row(check - num_z_checks());
    }
    const Coord &check_coord(size_t check) const {
        return is_z_check(check) ? geometry.z_checks[check] : geometry.x_checks[check - num_z_checks()];
    }

    bool operator==(const CssCode &) const = default;
};

/// Periodic 1D repetition code with checks Z_i Z_{i+1}.
inline CssCode repetition_code(size_t L) {
    if (L < 3) {
        throw std::invalid_argument("repetition_code: invalid size L=" + std::to_string(L) + " (need L >= 3)");
    }
    CssCode code;
    code.family = "repetition";
    code.size = L;
    code.n_qubits = L;
    code.z_checks = BitMatrix(L, L);
    code.x_checks = BitMatrix(0, L);
    for (size_t c = 0; c < L; c++) {
        code.z_checks.set(c, c, true);
        code.z_checks.set(c, (c + 1) % L, true);
    }
    code.z_logicals = BitMatrix(1, L);
    code.z_logicals.set(0, 0, true);
    code.x_logicals = BitMatrix(1, L);
    for (size_t q = 0; q < L; q++) {
        code.x_logicals.set(0, q, true);
    }
    code.geometry.dims = 1;
    code.geometry.extent = {static_cast<int32_t>(2 * L), 0};
    for (size_t q = 0; q < L; q++) {
        code.geometry.qubits.push_back({static_cast<int32_t>(2 * q), 0});
    }
    for (size_t c = 0; c < L; c++) {
        code.geometry.z_checks.push_back({static_cast<int32_t>(2 * c + 1), 0});
    }
    return code;
}

/// Toric code on an L x L torus. Edge (direction, row, col) has index
/// direction * L^2 + row * L + col; horizontal edges (direction 0) join vertex
/// (row, col) to (row, col + 1), vertical edges join (row, col) to (row + 1, col).
/// Z-type checks live on vertices, X-type checks on plaquettes.
inline CssCode toric_code(size_t L) {
    if (L < 2) {
        throw std::invalid_argument("toric_code: invalid size L=" + std::to_string(L) + " (need L >= 2)");
    }
    auto edge = [L](size_t dir, size_t r, size_t c) {
        return dir * L * L + (r % L) * L + (c % L);
    };
    size_t n = 2 * L * L;
    CssCode code;
    code.family = "toric";
    code.size = L;
    code.n_qubits = n;
    code.z_checks = BitMatrix(L * L, n);
    code.x_checks = BitMatrix(L * L, n);
    for (size_t r = 0; r < L; r++) {
        for (size_t c = 0; c < L; c++) {
            size_t v = r * L + c;
            code.z_checks.row(v).flip(edge(0, r, c));
            code.z_checks.row(v).flip(edge(0, r, c + L - 1));
            code.z_checks.row(v).flip(edge(1, r, c));
            code.z_checks.row(v).flip(edge(1, r + L - 1, c));

            code.x_checks.row(v).flip(edge(0, r, c));
            code.x_checks.row(v).flip(edge(0, r + 1, c));
            code.x_checks.row(v).flip(edge(1, r, c));
            code.x_checks.row(v).flip(edge(1, r, c + 1));
        }
    }
    code.z_logicals = BitMatrix(2, n);
    code.x_logicals = BitMatrix(2, n);
    for (size_t k = 0; k < L; k++) {
        // Pair 0: Z down column 0 of horizontal edges, X along row 0 of horizontal edges.
        code.z_logicals.set(0, edge(0, k, 0), true);
        code.x_logicals.set(0, edge(0, 0, k), true);
        // Pair 1: Z along row 0 of vertical edges, X down column 0 of vertical edges.
        code.z_logicals.set(1, edge(1, 0, k), true);
        code.x_logicals.set(1, edge(1, k, 0), true);
    }
    code.geometry.dims = 2;
    code.geometry.extent = {static_cast<int32_t>(2 * L), static_cast<int32_t>(2 * L)};
    code.geometry.qubits.resize(n);
    for (size_t r = 0; r < L; r++) {
        for (size_t c = 0; c < L; c++) {
            auto ri = static_cast<int32_t>(r), ci = static_cast<int32_t>(c);
            code.geometry.qubits[edge(0, r, c)] = {2 * ri, 2 * ci + 1};
            code.geometry.qubits[edge(1, r, c)] = {2 * ri + 1, 2 * ci};
            code.geometry.z_checks.push_back({2 * ri, 2 * ci});
            code.geometry.x_checks.push_back({2 * ri + 1, 2 * ci + 1});
        }
    }
    return code;
}

/// Named codes accepted by the command line and config files.
inline CssCode make_code(const std::string &family, size_t L) {
    if (family == "repetition") {
        return repetition_code(L);
    }
    if (family == "toric") {
        return toric_code(L);
    }
    throw std::invalid_argument("unknown code family '" + family + "' (supported: repetition, toric)");
}

struct InvariantResult {
    std::string name;
    bool passed = true;
    /// First violating pair of row indices, when the invariant failed.
    std::optional<std::pair<size_t, size_t>> violation;
    std::string detail;
};

struct ValidationReport {
    std::vector<InvariantResult> results;

    bool ok() const {
        for (const auto &r : results) {
            if (!r.passed) {
                return false;
            }
        }
        return true;
    }
    const InvariantResult *find(const std::string &name) const {
        for (const auto &r : results) {
            if (r.name == name) {
                return &r;
            }
        }
        return nullptr;
    }
};

namespace internal {

// Scans all row pairs (a, b) and expects dot(a, b) == expected(a, b).
template <typename Expected>
InvariantResult check_overlaps(
    const std::string &name, const BitMatrix &left, const BitMatrix &right, Expected expected) {
    InvariantResult result;
    result.name = name;
    for (size_t i = 0; i < left.num_rows(); i++) {
        for (size_t j = 0; j < right.num_rows(); j++) {
            if (left.row(i).dot(right.row(j)) != expected(i, j)) {
                result.passed = false;
                result.violation = std::make_pair(i, j);
                result.detail = name + ": rows (" + std::to_string(i) + ", " + std::to_string(j) + ")";
                return result;
            }
        }
    }
    return result;
}

}  // namespace internal

inline ValidationReport validate_code(const CssCode &code) {
    ValidationReport report;
    auto never = [](size_t, size_t) {
        return false;
    };
    report.results.push_back(internal::check_overlaps("css_commutation", code.z_checks, code.x_checks, never));
    report.results.push_back(internal::check_overlaps("z_logicals_vs_x_checks", code.z_logicals, code.x_checks, never));
    report.results.push_back(internal::check_overlaps("x_logicals_vs_z_checks", code.x_logicals, code.z_checks, never));
    report.results.push_back(internal::check_overlaps(
        "logical_pairing", code.z_logicals, code.x_logicals, [](size_t i, size_t j) {
            return i == j;
        }));

    InvariantResult nontrivial;
    nontrivial.name = "logicals_not_stabilizers";
    auto check_outside = [&](const BitMatrix &logicals, const BitMatrix &checks, const char *kind) {
        for (size_t k = 0; k < logicals.num_rows() && nontrivial.passed; k++) {
            if (gf2_in_row_space(checks.rows(), logicals.row(k))) {
                nontrivial.passed = false;
                nontrivial.violation = std::make_pair(k, k);
                nontrivial.detail = std::string(kind) + " logical " + std::to_string(k) + " is a product of checks";
            }
        }
    };
    check_outside(code.z_logicals, code.z_checks, "z");
    check_outside(code.x_logicals, code.x_checks, "x");
    report.results.push_back(nontrivial);
    return report;
}

inline nlohmann::json bit_matrix_to_json(const BitMatrix &m) {
    auto out = nlohmann::json::array();
    for (const auto &r : m.rows()) {
        out.push_back(r.support());
    }
    return out;
}

inline BitMatrix bit_matrix_from_json(const nlohmann::json &j, size_t num_cols) {
    BitMatrix m(0, num_cols);
    for (const auto &row : j) {
        auto support = row.get<std::vector<uint32_t>>();
        for (auto s : support) {
            if (s >= num_cols) {
                throw std::invalid_argument("support index " + std::to_string(s) + " out of range");
            }
        }
        m.push_row(BitRow::from_support(num_cols, support));
    }
    return m;
}

inline nlohmann::json code_to_json(const CssCode &code) {
    auto coords = [](const std::vector<Coord> &cs) {
        auto out = nlohmann::json::array();
        for (const auto &c : cs) {
            out.push_back({c[0], c[1]});
        }
        return out;
    };
    return {
        {"family", code.family},
        {"size", code.size},
        {"n_qubits", code.n_qubits},
        {"z_checks", bit_matrix_to_json(code.z_checks)},
        {"x_checks", bit_matrix_to_json(code.x_checks)},
        {"z_logicals", bit_matrix_to_json(code.z_logicals)},
        {"x_logicals", bit_matrix_to_json(code.x_logicals)},
        {"geometry",
         {{"dims", code.geometry.dims},
          {"periodic_extent", {code.geometry.extent[0], code.geometry.extent[1]}},
          {"qubits", coords(code.geometry.qubits)},
          {"z_checks", coords(code.geometry.z_checks)},
          {"x_checks", coords(code.geometry.x_checks)}}},
    };
}

inline CssCode code_from_json(const nlohmann::json &j) {
    CssCode code;
    code.family = j.at("family").get<std::string>();
    code.size = j.at("size").get<size_t>();
    code.n_qubits = j.at("n_qubits").get<size_t>();
    code.z_checks = bit_matrix_from_json(j.at("z_checks"), code.n_qubits);
    code.x_checks = bit_matrix_from_json(j.at("x_checks"), code.n_qubits);
    code.z_logicals = bit_matrix_from_json(j.at("z_logicals"), code.n_qubits);
    code.x_logicals = bit_matrix_from_json(j.at("x_logicals"), code.n_qubits);
    const auto &g = j.at("geometry");
    code.geometry.dims = g.at("dims").get<size_t>();
    auto ext = g.at("periodic_extent").get<std::vector<int32_t>>();
    code.geometry.extent = {ext.at(0), ext.at(1)};
    auto coords = [](const nlohmann::json &cs) {
        std::vector<Coord> out;
        for (const auto &c : cs) {
            out.push_back({c.at(0).get<int32_t>(), c.at(1).get<int32_t>()});
        }
        return out;
    };
    code.geometry.qubits = coords(g.at("qubits"));
    code.geometry.z_checks = coords(g.at("z_checks"));
    code.geometry.x_checks = coords(g.at("x_checks"));
    return code;
}

}  // namespace stm

#endif
