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

#ifndef _STM_FOLIATION_H
#define _STM_FOLIATION_H

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stm/codes.h"
#include "stm/pauli.h"
#include "stm/spacetime.h"

namespace stm {

// Layers are addressed by half-index h = 2 * layer, so h = 0, 1, ..., 2 m_f
// stands for layers 0, 1/2, 1, ..., m_f.

struct ResourceSite {
    bool syndrome = false;
    /// Code qubit index, or check index for syndrome sites.
    uint32_t index = 0;
    uint32_t half_layer = 0;
};

/// Foliated cluster-like state of an m_f round syndrome-extraction circuit.
///
/// Code copies sit in every layer. Z-type check syndrome qubits sit in integer
/// layers 1..m_f (h even), X-type check syndrome qubits in half-integer layers
/// 1/2..m_f-1/2 (h odd). Everything except the top code layer is measured.
struct ResourceState {
    CssCode code;
    size_t m_f = 0;
    std::vector<ResourceSite> sites;
    std::vector<std::pair<uint32_t, uint32_t>> cz_edges;
    /// Site index lookup: code_index[h * n + i], syndrome_index[h * checks + c] (-1 if absent).
    std::vector<int32_t> code_index;
    std::vector<int32_t> syndrome_index;

    size_t num_sites() const {
        return sites.size();
    }
    size_t num_half_layers() const {
        return 2 * m_f + 1;
    }
    uint32_t code_site(size_t qubit, size_t h) const {
        if (qubit >= code.n_qubits || h > 2 * m_f) {
            throw std::out_of_range("code_site: (" + std::to_string(qubit) + ", h=" + std::to_string(h) + ") out of range");
        }
        return static_cast<uint32_t>(code_index[h * code.n_qubits + qubit]);
    }
    bool has_syndrome_site(size_t check, size_t h) const {
        return check < code.num_checks() && h <= 2 * m_f && syndrome_index[h * code.num_checks() + check] >= 0;
    }
    uint32_t syndrome_site(size_t check, size_t h) const {
        if (!has_syndrome_site(check, h)) {
            throw std::out_of_range("syndrome_site: no syndrome qubit for check " + std::to_string(check) + " at h=" +
                                    std::to_string(h));
        }
        return static_cast<uint32_t>(syndrome_index[h * code.num_checks() + check]);
    }
    bool is_measured(size_t site) const {
        return sites[site].syndrome || sites[site].half_layer != 2 * m_f;
    }
    std::vector<uint32_t> measured_sites() const {
        std::vector<uint32_t> out;
        for (size_t s = 0; s < sites.size(); s++) {
            if (is_measured(s)) {
                out.push_back(static_cast<uint32_t>(s));
            }
        }
        return out;
    }
    std::vector<std::vector<uint32_t>> neighbors() const {
        std::vector<std::vector<uint32_t>> adj(sites.size());
        for (auto [a, b] : cz_edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        return adj;
    }
    /// Code qubits of layer 0 carry the input code state instead of |+>.
    bool in_input_layer(size_t site) const {
        return !sites[site].syndrome && sites[site].half_layer == 0;
    }

    std::string label(size_t site) const {
        const auto &s = sites[site];
        std::string layer = std::to_string(s.half_layer / 2) + (s.half_layer % 2 ? ".5" : "");
        return (s.syndrome ? "s" : "q") + std::to_string(s.index) + "@" + layer;
    }

    /// Line-oriented graph description: `v <site> <label>` then `e <a> <b>`.
    std::string graph_text() const {
        std::ostringstream out;
        out << "# resource state " << code.family << " L=" << code.size << " m_f=" << m_f << "\n";
        for (size_t s = 0; s < sites.size(); s++) {
            out << "v " << s << ' ' << label(s) << '\n';
        }
        for (auto [a, b] : cz_edges) {
            out << "e " << a << ' ' << b << '\n';
        }
        return out.str();
    }
};

inline ResourceState foliate(const CssCode &code, size_t m_f) {
    if (m_f < 1) {
        throw std::invalid_argument("foliate: invalid m_f=" + std::to_string(m_f) + " (need m_f >= 1)");
    }
    ResourceState rs;
    rs.code = code;
    rs.m_f = m_f;
    size_t n = code.n_qubits;
    size_t checks = code.num_checks();
    size_t H = 2 * m_f + 1;
    rs.code_index.assign(H * n, -1);
    rs.syndrome_index.assign(H * checks, -1);
    for (size_t h = 0; h < H; h++) {
        for (size_t i = 0; i < n; i++) {
            rs.code_index[h * n + i] = static_cast<int32_t>(rs.sites.size());
            rs.sites.push_back({false, static_cast<uint32_t>(i), static_cast<uint32_t>(h)});
        }
        for (size_t c = 0; c < checks; c++) {
            bool present = code.is_z_check(c) ? (h % 2 == 0 && h >= 2) : (h % 2 == 1);
            if (present) {
                rs.syndrome_index[h * checks + c] = static_cast<int32_t>(rs.sites.size());
                rs.sites.push_back({true, static_cast<uint32_t>(c), static_cast<uint32_t>(h)});
            }
        }
    }
    for (size_t h = 0; h + 1 < H; h++) {
        for (size_t i = 0; i < n; i++) {
            rs.cz_edges.push_back({rs.code_site(i, h), rs.code_site(i, h + 1)});
        }
    }
    for (size_t h = 0; h < H; h++) {
        for (size_t c = 0; c < checks; c++) {
            if (!rs.has_syndrome_site(c, h)) {
                continue;
            }
            for (auto q : code.check_row(c).support()) {
                rs.cz_edges.push_back({rs.syndrome_site(c, h), rs.code_site(q, h)});
            }
        }
    }
    return rs;
}

/// X-type cells, one per (check, slot) in the same order as the detectors of
/// the matching DetectorModel with rounds = m_f - 1.
inline std::vector<PauliString> detector_cells(const ResourceState &rs) {
    const auto &code = rs.code;
    size_t checks = code.num_checks();
    std::vector<PauliString> cells(checks * rs.m_f);
    for (size_t k = 0; k < rs.m_f; k++) {
        for (size_t c = 0; c < checks; c++) {
            PauliString cell;
            auto support = code.check_row(c).support();
            // Z-type: syndromes at h = 2k, 2k + 2 around code layer 2k + 1.
            // X-type: syndromes at h = 2k - 1, 2k + 1 around code layer 2k.
            size_t mid = code.is_z_check(c) ? 2 * k + 1 : 2 * k;
            for (auto q : support) {
                cell.mul(rs.code_site(q, mid), Pauli::X);
            }
            // The first cell of either type has no lower syndrome qubit.
            if (mid >= 1 && rs.has_syndrome_site(c, mid - 1)) {
                cell.mul(rs.syndrome_site(c, mid - 1), Pauli::X);
            }
            cell.mul(rs.syndrome_site(c, mid + 1), Pauli::X);
            cells[k * checks + c] = std::move(cell);
        }
    }
    return cells;
}

/// Temporal consistency operator of one logical: the input-layer logical,
/// a bulk X string, and the output-layer logical.
struct LblStabilizer {
    bool z_type = true;
    uint32_t logical = 0;
    PauliString bottom;
    PauliString bulk;
    PauliString top;

    PauliString op() const {
        PauliString out = bottom;
        out *= bulk;
        out *= top;
        return out;
    }
};

inline std::vector<LblStabilizer> lbl_stabilizers(const ResourceState &rs) {
    const auto &code = rs.code;
    std::vector<LblStabilizer> out;
    size_t top = 2 * rs.m_f;
    auto build = [&](const BitMatrix &logicals, bool z_type) {
        for (size_t k = 0; k < logicals.num_rows(); k++) {
            LblStabilizer s;
            s.z_type = z_type;
            s.logical = static_cast<uint32_t>(k);
            Pauli end = z_type ? Pauli::Z : Pauli::X;
            for (auto q : logicals.row(k).support()) {
                s.bottom.mul(rs.code_site(q, 0), end);
                s.top.mul(rs.code_site(q, top), end);
                // Z-type logicals: X on every half-integer layer.
                // X-type logicals: X on the interior integer layers.
                for (size_t h = z_type ? 1 : 2; h < top; h += 2) {
                    s.bulk.mul(rs.code_site(q, h), Pauli::X);
                }
            }
            out.push_back(std::move(s));
        }
    };
    if (code.num_z_checks() > 0) {
        build(code.z_logicals, true);
    }
    if (code.num_x_checks() > 0) {
        build(code.x_logicals, false);
    }
    return out;
}

/// Which logical is fixed in the input code state.
enum class LogicalFrame { z, x };

inline const char *logical_frame_name(LogicalFrame f) {
    return f == LogicalFrame::z ? "z" : "x";
}

/// Stabilizer generators of the noiseless resource state: X_v prod_{u~v} Z_u
/// for every site outside the input layer, plus the input code state's
/// stabilizers (checks and the framed logicals) conjugated by the CZ graph.
inline std::vector<PauliString> graph_generators(const ResourceState &rs, LogicalFrame frame) {
    const auto &code = rs.code;
    auto adj = rs.neighbors();
    std::vector<PauliString> gens;
    for (size_t v = 0; v < rs.num_sites(); v++) {
        if (rs.in_input_layer(v)) {
            continue;
        }
        PauliString k;
        k.mul(static_cast<uint32_t>(v), Pauli::X);
        for (auto u : adj[v]) {
            k.mul(u, Pauli::Z);
        }
        gens.push_back(std::move(k));
    }
    auto add_input = [&](const BitRow &support, Pauli p) {
        PauliString g;
        for (auto q : support.support()) {
            uint32_t site = rs.code_site(q, 0);
            g.mul(site, p);
            if (p == Pauli::X) {
                for (auto u : adj[site]) {
                    g.mul(u, Pauli::Z);
                }
            }
        }
        gens.push_back(std::move(g));
    };
    for (size_t c = 0; c < code.num_z_checks(); c++) {
        add_input(code.z_checks.row(c), Pauli::Z);
    }
    for (size_t c = 0; c < code.num_x_checks(); c++) {
        add_input(code.x_checks.row(c), Pauli::X);
    }
    const auto &logicals = frame == LogicalFrame::z ? code.z_logicals : code.x_logicals;
    for (const auto &row : logicals.rows()) {
        add_input(row, frame == LogicalFrame::z ? Pauli::Z : Pauli::X);
    }
    return gens;
}

/// A circuit fault: data X or Z between rounds t and t + 1, or a flipped
/// readout of `index` in round t.
struct CircuitEvent {
    enum Kind { X, Z, readout } kind = X;
    uint32_t index = 0;
    uint32_t round = 0;
};

inline CircuitEvent event_of(const Mechanism &m) {
    switch (m.kind) {
        case MechanismKind::data_x:
            return {CircuitEvent::X, m.target, m.time};
        case MechanismKind::data_z:
            return {CircuitEvent::Z, m.target, m.time};
        case MechanismKind::readout:
            return {CircuitEvent::readout, m.target, m.time};
    }
    return {};
}

/// `swapped_data_rules` is a deliberately wrong mapping used to check that the
/// verification suite notices a broken rule.
enum class MappingVariant { standard, swapped_data_rules };

/// Resource-state sites that receive a Z error for a circuit fault.
inline std::vector<uint32_t> map_circuit_error(const ResourceState &rs, const CircuitEvent &ev,
                                               MappingVariant variant = MappingVariant::standard) {
    const auto &code = rs.code;
    auto fail = [&](const std::string &why) {
        throw std::out_of_range("map_circuit_error: " + why);
    };
    size_t m_f = rs.m_f;
    bool swap = variant == MappingVariant::swapped_data_rules;
    switch (ev.kind) {
        case CircuitEvent::X:
        case CircuitEvent::Z: {
            if (ev.index >= code.n_qubits) {
                fail("qubit " + std::to_string(ev.index) + " out of range");
            }
            bool is_x = (ev.kind == CircuitEvent::X) != swap;
            // X between rounds t, t+1 -> layer t + 1/2; Z -> layer t + 1.
            size_t h = is_x ? 2 * ev.round + 1 : 2 * ev.round + 2;
            if (h >= 2 * m_f) {
                fail("data fault after round " + std::to_string(ev.round) + " lies outside m_f=" + std::to_string(m_f));
            }
            return {rs.code_site(ev.index, h)};
        }
        case CircuitEvent::readout: {
            if (ev.index >= code.num_checks()) {
                fail("check " + std::to_string(ev.index) + " out of range");
            }
            size_t h = code.is_z_check(ev.index) ? 2 * ev.round : 2 * ev.round + 1;
            if (!rs.has_syndrome_site(ev.index, h)) {
                fail("no readout of check " + std::to_string(ev.index) + " in round " + std::to_string(ev.round));
            }
            return {rs.syndrome_site(ev.index, h)};
        }
    }
    return {};
}

/// Logical operator of the code placed on one layer of the resource state.
inline PauliString layer_logical(const ResourceState &rs, const BitRow &support, Pauli p, size_t h) {
    PauliString out;
    for (auto q : support.support()) {
        out.mul(rs.code_site(q, h), p);
    }
    return out;
}

}  // namespace stm

#endif
