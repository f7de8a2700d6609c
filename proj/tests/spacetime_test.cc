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

#include "stm/spacetime.h"

#include <gtest/gtest.h>

#include <random>

using namespace stm;

namespace {

// Direct circuit replay for the bit-flip sector: evolve an X-error frame
// round by round, read every Z-type check, append a noiseless final readout,
// and XOR consecutive readouts.
BitRow replay_detectors(const DetectorModel &model, const BitRow &errors) {
    const auto &code = model.code;
    size_t T = model.rounds, mz = code.num_z_checks();
    std::vector<std::vector<bool>> s(T + 2, std::vector<bool>(mz, false));
    BitRow frame(code.n_qubits);
    for (size_t r = 1; r <= T + 1; r++) {
        for (auto k : errors.support()) {
            const auto &m = model.mechanisms[k];
            if (m.kind == MechanismKind::data_x && m.time == r - 1) {
                frame.flip(m.target);
            }
        }
        for (size_t c = 0; c < mz; c++) {
            bool v = code.z_checks.row(c).dot(frame);
            for (auto k : errors.support()) {
                const auto &m = model.mechanisms[k];
                if (r <= T && m.kind == MechanismKind::readout && m.target == c && m.time == r) {
                    v = !v;
                }
            }
            s[r][c] = v;
        }
    }
    BitRow d(model.num_detectors());
    for (size_t t = 0; t <= T; t++) {
        for (size_t c = 0; c < mz; c++) {
            d.set(model.detector_index(c, t), s[t][c] != s[t + 1][c]);
        }
    }
    return d;
}

BitRow single(size_t n, size_t k) {
    BitRow e(n);
    e.set(k, true);
    return e;
}

}  // namespace

TEST(spacetime, noise_model_validation) {
    ASSERT_NO_THROW(NoiseModel::phenomenological(0.5).validate());
    ASSERT_THROW(NoiseModel::phenomenological(0.7).validate(), std::invalid_argument);
    ASSERT_THROW((NoiseModel{-0.1, 0, 0}).validate(), std::invalid_argument);
    try {
        NoiseModel::phenomenological(0.7).validate();
    } catch (const std::invalid_argument &e) {
        ASSERT_NE(std::string(e.what()).find("probability out of [0, 0.5]"), std::string::npos);
    }
    ASSERT_THROW(build_detector_model(repetition_code(3), 0, NoiseModel::phenomenological(0.1)),
                 std::invalid_argument);
}

TEST(spacetime, repetition_mechanism_examples) {
    auto model = build_detector_model(repetition_code(3), 2, NoiseModel::phenomenological(0.1));
    ASSERT_EQ(model.num_detectors(), 3 * 3);
    ASSERT_EQ(model.num_mechanisms(), 3 * 3 + 3 * 2);
    for (size_t k = 0; k < model.num_mechanisms(); k++) {
        const auto &m = model.mechanisms[k];
        ASSERT_EQ(replay_detectors(model, single(model.num_mechanisms(), k)), model.detectors_of(single(model.num_mechanisms(), k)));
        if (m.kind == MechanismKind::data_x && m.target == 1 && m.time == 1) {
            // Qubit 1 sits in checks 0 (Z0Z1) and 1 (Z1Z2).
            ASSERT_EQ(m.detectors, (std::vector<uint32_t>{(uint32_t)model.detector_index(0, 1),
                                                          (uint32_t)model.detector_index(1, 1)}));
        }
        if (m.kind == MechanismKind::readout && m.target == 1 && m.time == 1) {
            ASSERT_EQ(m.detectors, (std::vector<uint32_t>{(uint32_t)model.detector_index(1, 0),
                                                          (uint32_t)model.detector_index(1, 1)}));
        }
    }
}

TEST(spacetime, random_errors_match_replay_and_are_linear) {
    std::mt19937_64 rng(3);
    for (size_t L : {3, 5, 8}) {
        for (size_t T : {1, 2, 5}) {
            auto model = build_detector_model(repetition_code(L), T, NoiseModel::phenomenological(0.2));
            size_t m = model.num_mechanisms();
            ASSERT_TRUE(model.detectors_of(BitRow(m)).none());
            for (int trial = 0; trial < 40; trial++) {
                BitRow e1(m), e2(m);
                for (size_t k = 0; k < m; k++) {
                    e1.set(k, rng() % 4 == 0);
                    e2.set(k, rng() % 4 == 0);
                }
                ASSERT_EQ(model.detectors_of(e1), replay_detectors(model, e1));
                ASSERT_EQ(model.detectors_of(e1 ^ e2), model.detectors_of(e1) ^ model.detectors_of(e2));
                ASSERT_EQ(syndromes_to_detectors(model, simulate_syndromes(model, e1)), model.detectors_of(e1));
            }
        }
    }
}

TEST(spacetime, repetition_detector_graph_is_square_lattice) {
    size_t L = 6, T = 5;
    auto model = build_detector_model(repetition_code(L), T, NoiseModel::phenomenological(0.1));
    for (const auto &m : model.mechanisms) {
        ASSERT_EQ(m.detectors.size(), 2);
        // Neighbours differ by one step in exactly one direction.
        ASSERT_EQ(model.distance(m.detectors[0], m.detectors[1]), 1);
    }
    for (size_t d = 0; d < model.num_detectors(); d++) {
        size_t t = model.detectors[d].round;
        size_t expected = (t == 0 || t == T) ? 3 : 4;
        ASSERT_EQ(model.detector_mechanisms[d].size(), expected) << d;
    }
}

TEST(spacetime, toric_sector_weights) {
    NoiseModel noise{0.1, 0.1, 0.1};
    auto model = build_detector_model(toric_code(3), 3, noise);
    for (const auto &m : model.mechanisms) {
        ASSERT_LE(m.detectors.size(), 2);
        bool z = model.detectors[m.detectors[0]].z_type;
        for (auto d : m.detectors) {
            ASSERT_EQ(model.detectors[d].z_type, z);
        }
    }
    ASSERT_EQ(model.num_logicals(), 4);
    // Default noise has no phase flips: the plaquette sector is silent.
    auto quiet = build_detector_model(toric_code(3), 3, NoiseModel::phenomenological(0.1));
    for (size_t d = 0; d < quiet.num_detectors(); d++) {
        if (!quiet.detectors[d].z_type) {
            ASSERT_EQ(detector_flip_probability(quiet, d), 0.0);
        }
    }
}

TEST(spacetime, undetectable_logical_cycle) {
    for (size_t L : {3, 6}) {
        auto model = build_detector_model(repetition_code(L), 4, NoiseModel::phenomenological(0.1));
        BitRow e(model.num_mechanisms());
        for (size_t k = 0; k < model.num_mechanisms(); k++) {
            const auto &m = model.mechanisms[k];
            if (m.kind == MechanismKind::data_x && m.time == 2) {
                e.set(k, true);
            }
        }
        ASSERT_TRUE(model.detectors_of(e).none());
        ASSERT_TRUE(model.logicals_of(e).get(0));
    }
    auto model = build_detector_model(toric_code(4), 1, NoiseModel{0.1, 0, 0});
    BitRow e(model.num_mechanisms());
    for (size_t k = 0; k < model.num_mechanisms(); k++) {
        const auto &m = model.mechanisms[k];
        // X string crossing the Z logical of pair 0 once.
        if (m.kind == MechanismKind::data_x && m.time == 0 && model.code.x_logicals.get(0, m.target)) {
            e.set(k, true);
        }
    }
    ASSERT_TRUE(model.detectors_of(e).none());
    ASSERT_TRUE(model.logicals_of(e).get(0));
    ASSERT_FALSE(model.logicals_of(e).get(1));
}

TEST(spacetime, flip_probability) {
    auto model = build_detector_model(repetition_code(5), 4, NoiseModel::phenomenological(0.1));
    size_t bulk = model.detector_index(2, 2);
    ASSERT_EQ(model.detector_mechanisms[bulk].size(), 4);
    // Parity enumeration over the 16 patterns of the incident mechanisms.
    double odd = 0;
    for (int mask = 0; mask < 16; mask++) {
        int w = std::popcount(static_cast<unsigned>(mask));
        double pr = std::pow(0.1, w) * std::pow(0.9, 4 - w);
        if (w % 2) {
            odd += pr;
        }
    }
    ASSERT_NEAR(odd, 0.2952, 1e-12);
    ASSERT_NEAR(detector_flip_probability(model, bulk), 0.2952, 1e-12);
    auto zero = build_detector_model(repetition_code(5), 4, NoiseModel::phenomenological(0));
    ASSERT_EQ(detector_flip_probability(zero, bulk), 0);
    auto half = build_detector_model(repetition_code(5), 4, NoiseModel::phenomenological(0.5));
    ASSERT_NEAR(detector_flip_probability(half, bulk), 0.5, 1e-15);
}

TEST(spacetime, syndromes_to_detectors_xor) {
    auto model = build_detector_model(repetition_code(4), 4, NoiseModel::phenomenological(0.1));
    SyndromeHistory h(4, 5);
    ASSERT_TRUE(syndromes_to_detectors(model, h).none());
    h.flip(1, 2);
    auto d = syndromes_to_detectors(model, h);
    ASSERT_EQ(d.support(), (std::vector<uint32_t>{(uint32_t)model.detector_index(1, 2),
                                                  (uint32_t)model.detector_index(1, 3)}));
    h.flip(1, 3);
    d = syndromes_to_detectors(model, h);
    ASSERT_EQ(d.support(), (std::vector<uint32_t>{(uint32_t)model.detector_index(1, 2),
                                                  (uint32_t)model.detector_index(1, 4)}));
    ASSERT_THROW(syndromes_to_detectors(model, SyndromeHistory(4, 4)), std::invalid_argument);
}

TEST(spacetime, text_listing_is_stable) {
    auto model = build_detector_model(repetition_code(3), 1, NoiseModel::phenomenological(0.125));
    auto text = model.to_text();
    ASSERT_NE(text.find("0.125 data_x D0 D2 L0\n"), std::string::npos) << text;
    ASSERT_NE(text.find("0.125 readout D0 D3\n"), std::string::npos) << text;
    ASSERT_EQ(model.hash(), build_detector_model(repetition_code(3), 1, NoiseModel::phenomenological(0.125)).hash());
    ASSERT_NE(model.hash(), build_detector_model(repetition_code(3), 1, NoiseModel::phenomenological(0.1)).hash());
}
