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

#include "stm/entropy.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "stm/foliation.h"
#include "stm/tableau.h"

using namespace stm;

namespace {

double h2(double p) {
    return p <= 0 || p >= 1 ? 0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

std::vector<uint32_t> all_detectors(const DetectorModel &m) {
    std::vector<uint32_t> r(m.num_detectors());
    std::iota(r.begin(), r.end(), 0);
    return r;
}

// Log2 of the number of distinct region patterns reachable by XOR-ing
// mechanism columns: the size of the image, grown by closure.
double image_bits(const DetectorModel &model, std::span<const uint32_t> region) {
    std::set<uint64_t> reach{0};
    for (const auto &m : model.mechanisms) {
        uint64_t mask = 0;
        for (size_t j = 0; j < region.size(); j++) {
            if (std::find(m.detectors.begin(), m.detectors.end(), region[j]) != m.detectors.end()) {
                mask |= uint64_t{1} << j;
            }
        }
        if (mask == 0 || reach.count(mask)) {
            continue;
        }
        std::vector<uint64_t> add;
        for (auto x : reach) {
            add.push_back(x ^ mask);
        }
        reach.insert(add.begin(), add.end());
    }
    return std::log2(static_cast<double>(reach.size()));
}

}  // namespace

TEST(entropy, plugin_examples) {
    EXPECT_DOUBLE_EQ(plugin_entropy({{0, 5}, {1, 5}}, 10).value, 1.0);
    EXPECT_DOUBLE_EQ(plugin_entropy({{0, 10}}, 10).value, 0.0);
    EXPECT_DOUBLE_EQ(plugin_entropy({{0, 10}}, 10, Correction::miller_madow).value, 0.0);
    EXPECT_DOUBLE_EQ(plugin_entropy({{0, 2}, {1, 2}, {2, 2}, {3, 2}}, 8).value, 2.0);
    EXPECT_THROW(plugin_entropy({}, 0), std::invalid_argument);
    EXPECT_THROW(plugin_entropy({{0, 3}}, 4), std::invalid_argument);
}

TEST(entropy, miller_madow_term) {
    // Three patterns in 30 samples: correction (K - 1) / (2 n ln 2).
    auto raw = plugin_entropy({{0, 10}, {1, 10}, {2, 10}}, 30, Correction::none, 2);
    auto mm = plugin_entropy({{0, 10}, {1, 10}, {2, 10}}, 30, Correction::miller_madow, 2);
    EXPECT_NEAR(raw.value, std::log2(3.0), 1e-12);
    EXPECT_NEAR(mm.value - raw.value, 2.0 / (60 * std::log(2.0)), 1e-12);
    EXPECT_EQ(mm.support, 3u);
    // Clamped to the region width.
    auto one = plugin_entropy({{0, 1}, {1, 1}}, 2, Correction::miller_madow, 1);
    EXPECT_DOUBLE_EQ(one.value, 1.0);
}

TEST(entropy, jackknife_replicates_match_recomputation) {
    std::mt19937_64 rng(3);
    std::vector<uint64_t> keys(1000);
    for (auto &k : keys) {
        k = rng() % 7 == 0 ? rng() % 40 : rng() % 5;
    }
    size_t G = 8;
    for (auto corr : {Correction::none, Correction::miller_madow}) {
        auto jk = jackknife_entropy(keys, 6, G, corr);
        auto bounds = jackknife_bounds(keys.size(), G);
        ASSERT_EQ(jk.leave_one_out.size(), G);
        for (size_t g = 0; g < G; g++) {
            std::map<uint64_t, uint64_t> counts;
            for (size_t i = 0; i < keys.size(); i++) {
                if (i < bounds[g] || i >= bounds[g + 1]) {
                    counts[keys[i]]++;
                }
            }
            double direct = plugin_entropy(counts, keys.size() - (bounds[g + 1] - bounds[g]), corr, 6).value;
            EXPECT_NEAR(jk.leave_one_out[g], direct, 1e-12);
        }
        std::map<uint64_t, uint64_t> all;
        for (auto k : keys) {
            all[k]++;
        }
        EXPECT_NEAR(jk.full.value, plugin_entropy(all, keys.size(), corr, 6).value, 1e-12);
        EXPECT_GT(jk.full.std_error, 0);
    }
    EXPECT_THROW(jackknife_entropy(keys, 6, 65), std::invalid_argument);
}

TEST(entropy, exact_examples) {
    NoiseModel n;
    n.p_x = 0;
    n.q = 0.1;
    auto model = build_detector_model(repetition_code(4), 4, n);
    std::vector<uint32_t> one{static_cast<uint32_t>(model.detector_index(1, 2))};
    EXPECT_NEAR(h2(0.18), 0.6801, 5e-5);
    EXPECT_NEAR(exact_entropy(model, one), h2(0.18), 1e-12);

    auto quiet = build_detector_model(repetition_code(4), 4, NoiseModel::phenomenological(0));
    EXPECT_EQ(exact_entropy(quiet, all_detectors(quiet)), 0.0);

    n.q = 0.5;
    auto fair = build_detector_model(repetition_code(4), 4, n);
    std::vector<uint32_t> first{static_cast<uint32_t>(fair.detector_index(1, 0))};
    EXPECT_NEAR(exact_entropy(fair, first), 1.0, 1e-12);
}

TEST(entropy, exact_cap_reports_count) {
    auto model = build_detector_model(repetition_code(6), 4, NoiseModel::phenomenological(0.1));
    try {
        exact_entropy(model, all_detectors(model));
        FAIL() << "expected refusal";
    } catch (const std::length_error &e) {
        EXPECT_NE(std::string(e.what()).find(std::to_string(model.num_mechanisms())), std::string::npos);
    }
    std::vector<uint32_t> wide(27);  // within 64 bits, beyond the dense cap
    std::iota(wide.begin(), wide.end(), 0);
    EXPECT_THROW(exact_marginal(model, wide), std::length_error);
}

TEST(entropy, enumeration_and_convolution_agree) {
    auto model = build_detector_model(repetition_code(4), 3, NoiseModel::phenomenological(0.13));
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; trial++) {
        std::vector<uint32_t> region;
        for (uint32_t d = 0; d < model.num_detectors(); d++) {
            if (rng() % 3 == 0) {
                region.push_back(d);
            }
        }
        if (region.empty() || region_mechanisms(model, region).mechanisms.size() > kBruteForceMechanismCap) {
            continue;
        }
        EXPECT_NEAR(exact_entropy(model, region), exact_marginal(model, region).entropy(), 1e-10);
    }
}

TEST(entropy, monotone_under_restriction) {
    auto model = build_detector_model(repetition_code(4), 3, NoiseModel::phenomenological(0.08));
    auto full = all_detectors(model);
    auto dist = exact_marginal(model, full);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; trial++) {
        std::vector<size_t> sub, subsub;
        for (size_t j = 0; j < full.size(); j++) {
            if (rng() % 2) {
                sub.push_back(j);
            }
        }
        for (size_t j = 0; j < sub.size(); j++) {
            if (rng() % 2) {
                subsub.push_back(j);
            }
        }
        auto a = dist.project(sub);
        EXPECT_LE(a.project(subsub).entropy(), a.entropy() + 1e-12);
        EXPECT_LE(a.entropy(), dist.entropy() + 1e-12);
    }
}

TEST(entropy, rank_identity_and_duplicates) {
    NoiseModel half;
    half.p_x = 0.5;
    half.q = 0.5;
    auto model = build_detector_model(repetition_code(6), 4, half);
    // Bulk detectors far apart have disjoint supports: rank = count.
    std::vector<uint32_t> three{static_cast<uint32_t>(model.detector_index(0, 1)),
                                static_cast<uint32_t>(model.detector_index(3, 1)),
                                static_cast<uint32_t>(model.detector_index(0, 3))};
    EXPECT_EQ(rank_entropy_half(model, three), 3.0);
    std::vector<uint32_t> dup{three[0], three[0]};
    EXPECT_EQ(rank_entropy_half(model, dup), 1.0);
    auto off = build_detector_model(repetition_code(6), 4, NoiseModel::phenomenological(0.1));
    EXPECT_THROW(rank_entropy_half(off, three), std::invalid_argument);
}

TEST(entropy, rank_matches_brute_force_image) {
    NoiseModel half;
    half.p_x = 0.5;
    half.q = 0.5;
    auto model = build_detector_model(repetition_code(4), 3, half);
    auto full = all_detectors(model);
    EXPECT_EQ(rank_entropy_half(model, full), image_bits(model, full));
    EXPECT_NEAR(exact_marginal(model, full).entropy(), image_bits(model, full), 1e-9);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; trial++) {
        std::vector<uint32_t> region;
        for (auto d : full) {
            if (rng() % 2) {
                region.push_back(d);
            }
        }
        if (region.empty()) {
            region.push_back(0);
        }
        EXPECT_EQ(rank_entropy_half(model, region), image_bits(model, region)) << trial;
    }
}

TEST(entropy, decomposition_residual_vanishes) {
    for (size_t L : {3, 4}) {
        for (size_t T : {2, 3}) {
            for (double p : {0.05, 0.1, 0.3}) {
                auto code = repetition_code(L);
                std::vector<uint32_t> raw(L * (T + 1));
                std::iota(raw.begin(), raw.end(), 0);
                auto rep = entropy_decomposition_check(code, T, NoiseModel::phenomenological(p), raw);
                EXPECT_NEAR(rep.residual, 0, 1e-10) << L << " " << T << " " << p;
                EXPECT_EQ(rep.s_bits, raw.size());
            }
        }
    }
}

TEST(entropy, decomposition_limits) {
    auto code = repetition_code(3);
    std::vector<uint32_t> raw(9);
    std::iota(raw.begin(), raw.end(), 0);
    auto quiet = entropy_decomposition_check(code, 2, NoiseModel::phenomenological(0), raw);
    EXPECT_NEAR(quiet.h_d, 0, 1e-15);
    EXPECT_NEAR(quiet.h_s, static_cast<double>(quiet.s_bits - quiet.d_bits), 1e-12);
    EXPECT_EQ(quiet.d_bits, 6u);

    // One readout per check: no frame-independent combination exists.
    std::vector<uint32_t> sparse{0, 4, 8};
    auto rep = entropy_decomposition_check(code, 2, NoiseModel::phenomenological(0.1), sparse);
    EXPECT_EQ(rep.d_bits, 0u);
    EXPECT_NEAR(rep.h_s, 3.0, 1e-12);
}

TEST(entropy, plugin_consistent_with_exact) {
    auto model = build_detector_model(repetition_code(6), 5, NoiseModel::phenomenological(0.1));
    std::vector<uint32_t> region{static_cast<uint32_t>(model.detector_index(1, 2)),
                                 static_cast<uint32_t>(model.detector_index(2, 2)),
                                 static_cast<uint32_t>(model.detector_index(3, 2)),
                                 static_cast<uint32_t>(model.detector_index(2, 3)),
                                 static_cast<uint32_t>(model.detector_index(2, 1)),
                                 static_cast<uint32_t>(model.detector_index(3, 3))};
    double exact = exact_entropy(model, region);
    auto b = sample_batch(model, region, 1000000, 31);
    std::vector<size_t> cols(region.size());
    std::iota(cols.begin(), cols.end(), 0);
    auto jk = jackknife_entropy(pattern_keys(b, cols), cols.size());
    EXPECT_NEAR(jk.full.value, exact, 3 * jk.full.std_error);
    EXPECT_LT(jk.full.std_error, 0.01);
}

TEST(entropy, resource_state_signs_match_detector_entropy) {
    // Exact distribution of detector-cell signs, one tableau run per error
    // configuration, against the circuit-side exact H(d).
    auto code = repetition_code(3);
    size_t m_f = 2;
    auto rs = foliate(code, m_f);
    auto cells = detector_cells(rs);
    auto model = build_detector_model(code, m_f - 1, NoiseModel::phenomenological(0.1));
    size_t M = model.num_mechanisms();
    ASSERT_LE(M, 12u);
    auto clean = init_graph_state(rs);
    std::map<std::string, double> dist;
    for (uint64_t e = 0; e < (uint64_t{1} << M); e++) {
        auto t = clean;
        double pr = 1;
        for (size_t k = 0; k < M; k++) {
            double p = model.mechanisms[k].probability;
            if ((e >> k) & 1) {
                pr *= p;
                apply_z(t, map_circuit_error(rs, event_of(model.mechanisms[k])));
            } else {
                pr *= 1 - p;
            }
        }
        auto rng = stream_rng(e, "tableau");
        auto rec = measure_x_all(t, rs, rng);
        dist[evaluate_detectors(rec, cells).str()] += pr;
    }
    std::vector<double> probs;
    for (auto &[k, p] : dist) {
        probs.push_back(p);
    }
    EXPECT_NEAR(entropy_bits(probs), exact_entropy(model, all_detectors(model)), 1e-12);
}
