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

#ifndef _STM_SPACETIME_H
#define _STM_SPACETIME_H

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stm/codes.h"
#include "stm/gf2.h"
#include "stm/util.h"

namespace stm {

/// Independent phenomenological noise rates.
struct NoiseModel {
    double p_x = 0;
    double p_z = 0;
    double q = 0;

    /// Data bit-flips and readout flips at the same rate, no phase flips.
    static NoiseModel phenomenological(double p) {
        return {p, 0, p};
    }

    void validate() const {
        auto check = [](double v, const char *name) {
            if (!(v >= 0 && v <= 0.5)) {
                throw std::invalid_argument(
                    std::string("invalid noise model: ") + name + "=" + format_double(v) +
                    " probability out of [0, 0.5]");
            }
        };
        check(p_x, "p_x");
        check(p_z, "p_z");
        check(q, "q");
    }

    bool operator==(const NoiseModel &) const = default;
};

enum class MechanismKind : uint8_t { data_x, data_z, readout };

inline const char *mechanism_kind_name(MechanismKind kind) {
    switch (kind) {
        case MechanismKind::data_x:
            return "data_x";
        case MechanismKind::data_z:
            return "data_z";
        case MechanismKind::readout:
            return "readout";
    }
    return "?";
}

/// A detector compares consecutive readouts of one check.
///
/// `round` is the comparison slot t in [0, T]: slot 0 compares the first noisy
/// readout against the perfect input state and slot T compares the last noisy
/// readout against the appended perfect round.
struct Detector {
    uint32_t check = 0;
    uint32_t round = 0;
    bool z_type = true;
    /// Check position in check-lattice units (spatial axes, periodic).
    Coord position{0, 0};
};

/// One independent fault.
///
/// For data faults `target` is a qubit and `time` the interface t: the fault
/// happens after readout round t and before round t + 1. Readout faults flip
/// the outcome of check `target` in round `time`. Z-type checks are read in
/// rounds 1..T; X-type checks are read after the Z-type checks of the same
/// round, in rounds 0..T-1. Round T + 1 (and the X-type half of round T) is
/// the appended noiseless readout.
struct Mechanism {
    MechanismKind kind = MechanismKind::data_x;
    uint32_t target = 0;
    uint32_t time = 0;
    double probability = 0;
    std::vector<uint32_t> detectors;
    std::vector<uint32_t> logicals;
};

struct DetectorModel {
    CssCode code;
    size_t rounds = 0;
    NoiseModel noise;
    std::vector<Detector> detectors;
    std::vector<Mechanism> mechanisms;
    /// Names of the protected logical bits, one per logical_action row.
    std::vector<std::string> logical_names;
    /// detector -> incident mechanism indices (ascending).
    std::vector<std::vector<uint32_t>> detector_mechanisms;

    size_t num_detectors() const {
        return detectors.size();
    }
    size_t num_mechanisms() const {
        return mechanisms.size();
    }
    size_t num_logicals() const {
        return logical_names.size();
    }
    /// Detector index of (check, slot).
    size_t detector_index(size_t check, size_t slot) const {
        return slot * code.num_checks() + check;
    }

    /// Rows are detectors, columns mechanisms.
    BitMatrix incidence() const {
        BitMatrix m(num_detectors(), num_mechanisms());
        for (size_t k = 0; k < mechanisms.size(); k++) {
            for (auto d : mechanisms[k].detectors) {
                m.set(d, k, true);
            }
        }
        return m;
    }

    /// Rows are protected logical bits, columns mechanisms.
    BitMatrix logical_action() const {
        BitMatrix m(num_logicals(), num_mechanisms());
        for (size_t k = 0; k < mechanisms.size(); k++) {
            for (auto l : mechanisms[k].logicals) {
                m.set(l, k, true);
            }
        }
        return m;
    }

    /// Detector image M e of an error indicator vector over mechanisms.
    BitRow detectors_of(const BitRow &errors) const {
        BitRow out(num_detectors());
        for (auto k : errors.support()) {
            for (auto d : mechanisms[k].detectors) {
                out.flip(d);
            }
        }
        return out;
    }

    BitRow logicals_of(const BitRow &errors) const {
        BitRow out(num_logicals());
        for (auto k : errors.support()) {
            for (auto l : mechanisms[k].logicals) {
                out.flip(l);
            }
        }
        return out;
    }

    /// Mechanisms touching at least one detector of the region (ascending).
    std::vector<uint32_t> incident_mechanisms(std::span<const uint32_t> region) const {
        std::vector<uint32_t> out;
        for (auto d : region) {
            const auto &adj = detector_mechanisms.at(d);
            out.insert(out.end(), adj.begin(), adj.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Chebyshev distance between detectors, periodic in space and open in time.
    int32_t distance(size_t a, size_t b) const {
        const auto &da = detectors[a];
        const auto &db = detectors[b];
        int32_t best = std::abs(static_cast<int32_t>(da.round) - static_cast<int32_t>(db.round));
        for (size_t axis = 0; axis < code.geometry.dims; axis++) {
            int32_t period = code.geometry.extent[axis] / 2;
            int32_t diff = std::abs(da.position[axis] - db.position[axis]) % period;
            best = std::max(best, std::min(diff, period - diff));
        }
        return best;
    }

    /// Plain-text listing, one line per mechanism: `prob kind D... L...`.
    std::string to_text() const {
        std::ostringstream out;
        out << "# code " << code.family << " L=" << code.size << " rounds=" << rounds << "\n";
        out << "# detectors " << num_detectors() << " mechanisms " << num_mechanisms() << " logicals "
            << num_logicals() << "\n";
        for (const auto &m : mechanisms) {
            out << format_double(m.probability) << ' ' << mechanism_kind_name(m.kind);
            for (auto d : m.detectors) {
                out << " D" << d;
            }
            for (auto l : m.logicals) {
                out << " L" << l;
            }
            out << '\n';
        }
        return out.str();
    }

    uint64_t hash() const {
        return fnv1a(to_text());
    }
};

inline DetectorModel build_detector_model(const CssCode &code, size_t rounds, const NoiseModel &noise) {
    if (rounds < 1) {
        throw std::invalid_argument("build_detector_model: invalid rounds T=" + std::to_string(rounds) + " (need T >= 1)");
    }
    noise.validate();

    DetectorModel model;
    model.code = code;
    model.rounds = rounds;
    model.noise = noise;
    size_t num_checks = code.num_checks();
    size_t mz = code.num_z_checks();
    size_t T = rounds;

    for (size_t t = 0; t <= T; t++) {
        for (size_t c = 0; c < num_checks; c++) {
            Detector d;
            d.check = static_cast<uint32_t>(c);
            d.round = static_cast<uint32_t>(t);
            d.z_type = code.is_z_check(c);
            const auto &pos = code.check_coord(c);
            d.position = {pos[0] / 2, pos[1] / 2};
            model.detectors.push_back(d);
        }
    }

    bool has_z_checks = code.num_z_checks() > 0;
    bool has_x_checks = code.num_x_checks() > 0;
    size_t num_z_logicals = has_z_checks ? code.z_logicals.num_rows() : 0;
    if (has_z_checks) {
        for (size_t k = 0; k < code.z_logicals.num_rows(); k++) {
            model.logical_names.push_back("Z" + std::to_string(k));
        }
    }
    if (has_x_checks) {
        for (size_t k = 0; k < code.x_logicals.num_rows(); k++) {
            model.logical_names.push_back("X" + std::to_string(k));
        }
    }

    // Checks containing each qubit, per sector.
    std::vector<std::vector<uint32_t>> z_checks_of(code.n_qubits), x_checks_of(code.n_qubits);
    for (size_t c = 0; c < mz; c++) {
        for (auto q : code.z_checks.row(c).support()) {
            z_checks_of[q].push_back(static_cast<uint32_t>(c));
        }
    }
    for (size_t c = 0; c < code.num_x_checks(); c++) {
        for (auto q : code.x_checks.row(c).support()) {
            x_checks_of[q].push_back(static_cast<uint32_t>(mz + c));
        }
    }

    auto add = [&](Mechanism m) {
        std::sort(m.detectors.begin(), m.detectors.end());
        model.mechanisms.push_back(std::move(m));
    };

    if (has_z_checks) {
        for (size_t t = 0; t <= T; t++) {
            for (size_t q = 0; q < code.n_qubits; q++) {
                Mechanism m{MechanismKind::data_x, static_cast<uint32_t>(q), static_cast<uint32_t>(t), noise.p_x, {}, {}};
                for (auto c : z_checks_of[q]) {
                    m.detectors.push_back(static_cast<uint32_t>(model.detector_index(c, t)));
                }
                for (size_t k = 0; k < code.z_logicals.num_rows(); k++) {
                    if (code.z_logicals.get(k, q)) {
                        m.logicals.push_back(static_cast<uint32_t>(k));
                    }
                }
                add(std::move(m));
            }
        }
    }
    if (has_x_checks) {
        for (size_t t = 0; t + 1 <= T; t++) {
            for (size_t q = 0; q < code.n_qubits; q++) {
                Mechanism m{MechanismKind::data_z, static_cast<uint32_t>(q), static_cast<uint32_t>(t), noise.p_z, {}, {}};
                for (auto c : x_checks_of[q]) {
                    m.detectors.push_back(static_cast<uint32_t>(model.detector_index(c, t + 1)));
                }
                for (size_t k = 0; k < code.x_logicals.num_rows(); k++) {
                    if (code.x_logicals.get(k, q)) {
                        m.logicals.push_back(static_cast<uint32_t>(num_z_logicals + k));
                    }
                }
                add(std::move(m));
            }
        }
    }
    for (size_t c = 0; c < mz; c++) {
        for (size_t t = 1; t <= T; t++) {
            Mechanism m{MechanismKind::readout, static_cast<uint32_t>(c), static_cast<uint32_t>(t), noise.q, {}, {}};
            m.detectors = {static_cast<uint32_t>(model.detector_index(c, t - 1)),
                           static_cast<uint32_t>(model.detector_index(c, t))};
            add(std::move(m));
        }
    }
    // The X-type sector is switched on by phase flips; without them its
    // readouts are left noiseless so that sector stays silent.
    double q_x = noise.p_z > 0 ? noise.q : 0.0;
    for (size_t c = mz; c < num_checks; c++) {
        for (size_t t = 0; t + 1 <= T; t++) {
            Mechanism m{MechanismKind::readout, static_cast<uint32_t>(c), static_cast<uint32_t>(t), q_x, {}, {}};
            m.detectors = {static_cast<uint32_t>(model.detector_index(c, t)),
                           static_cast<uint32_t>(model.detector_index(c, t + 1))};
            add(std::move(m));
        }
    }

    model.detector_mechanisms.resize(model.detectors.size());
    for (size_t k = 0; k < model.mechanisms.size(); k++) {
        for (auto d : model.mechanisms[k].detectors) {
            model.detector_mechanisms[d].push_back(static_cast<uint32_t>(k));
        }
    }
    return model;
}

/// Probability that an odd number of the detector's incident mechanisms fire.
inline double detector_flip_probability(const DetectorModel &model, size_t detector) {
    double prod = 1;
    for (auto k : model.detector_mechanisms.at(detector)) {
        prod *= 1 - 2 * model.mechanisms[k].probability;
    }
    return (1 - prod) / 2;
}

/// Raw readouts, one bit per (check, slot). Slot j holds the readout that
/// detector slot j compares against slot j - 1: for Z-type checks it is round
/// j + 1, for X-type checks round j. Slot T is the appended perfect readout.
struct SyndromeHistory {
    size_t num_checks = 0;
    size_t num_slots = 0;
    BitRow bits;

    SyndromeHistory() = default;
    SyndromeHistory(size_t checks, size_t slots) : num_checks(checks), num_slots(slots), bits(checks * slots) {
    }

    bool get(size_t check, size_t slot) const {
        return bits.get(slot * num_checks + check);
    }
    void flip(size_t check, size_t slot) {
        bits.flip(slot * num_checks + check);
    }
};

/// Readouts produced by an error configuration on a perfect input code state.
inline SyndromeHistory simulate_syndromes(const DetectorModel &model, const BitRow &errors) {
    const auto &code = model.code;
    size_t slots = model.rounds + 1;
    SyndromeHistory h(code.num_checks(), slots);
    size_t mz = code.num_z_checks();
    for (auto k : errors.support()) {
        const auto &m = model.mechanisms[k];
        switch (m.kind) {
            case MechanismKind::data_x:
                for (size_t c = 0; c < mz; c++) {
                    if (code.z_checks.get(c, m.target)) {
                        for (size_t j = m.time; j < slots; j++) {
                            h.flip(c, j);
                        }
                    }
                }
                break;
            case MechanismKind::data_z:
                for (size_t c = 0; c < code.num_x_checks(); c++) {
                    if (code.x_checks.get(c, m.target)) {
                        for (size_t j = m.time + 1; j < slots; j++) {
                            h.flip(mz + c, j);
                        }
                    }
                }
                break;
            case MechanismKind::readout:
                h.flip(m.target, code.is_z_check(m.target) ? m.time - 1 : m.time);
                break;
        }
    }
    return h;
}

inline BitRow syndromes_to_detectors(const DetectorModel &model, const SyndromeHistory &history) {
    size_t num_checks = model.code.num_checks();
    size_t slots = model.rounds + 1;
    if (history.num_checks != num_checks || history.num_slots != slots || history.bits.size() != num_checks * slots) {
        throw std::invalid_argument(
            "syndromes_to_detectors: history shape " + std::to_string(history.num_checks) + "x" +
            std::to_string(history.num_slots) + " does not match model shape " + std::to_string(num_checks) + "x" +
            std::to_string(slots));
    }
    BitRow out(model.num_detectors());
    for (size_t c = 0; c < num_checks; c++) {
        bool prev = false;
        for (size_t j = 0; j < slots; j++) {
            bool cur = history.get(c, j);
            out.set(model.detector_index(c, j), cur != prev);
            prev = cur;
        }
    }
    return out;
}

}  // namespace stm

#endif
