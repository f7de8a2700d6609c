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

#include "stm/decoder.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stm;

namespace {

BitRow errors_of(const DetectorModel &model, std::initializer_list<size_t> ks) {
    BitRow e(model.num_mechanisms());
    for (auto k : ks) {
        e.flip(k);
    }
    return e;
}

BitRow as_row(const DetectorModel &model, const std::vector<uint32_t> &correction) {
    BitRow e(model.num_mechanisms());
    for (auto k : correction) {
        e.flip(k);
    }
    return e;
}

// Decodes the syndrome of `truth` and checks validity; returns whether the
// residual flips a logical.
bool residual_flips_logical(UnionFindDecoder &dec, const DetectorModel &model, const BitRow &truth) {
    auto det = model.detectors_of(truth);
    auto res = dec.decode(det);
    auto corr = as_row(model, res.correction);
    EXPECT_EQ(model.detectors_of(corr), det);
    EXPECT_EQ(model.logicals_of(corr), res.logical_flips);
    return !(model.logicals_of(truth) ^ res.logical_flips).none();
}

}  // namespace

TEST(decoder, empty_pattern) {
    auto model = build_detector_model(repetition_code(8), 8, NoiseModel::phenomenological(0.1));
    auto res = decode(model, BitRow(model.num_detectors()));
    EXPECT_TRUE(res.correction.empty());
    EXPECT_TRUE(res.logical_flips.none());
}

TEST(decoder, every_single_mechanism) {
    auto model = build_detector_model(repetition_code(8), 8, NoiseModel::phenomenological(0.1));
    UnionFindDecoder dec(model);
    for (size_t k = 0; k < model.num_mechanisms(); k++) {
        EXPECT_FALSE(residual_flips_logical(dec, model, errors_of(model, {k}))) << k;
    }
}

TEST(decoder, every_weight_two_pattern) {
    auto model = build_detector_model(repetition_code(6), 6, NoiseModel::phenomenological(0.1));
    UnionFindDecoder dec(model);
    size_t m = model.num_mechanisms();
    for (size_t a = 0; a < m; a++) {
        for (size_t b = a + 1; b < m; b++) {
            ASSERT_FALSE(residual_flips_logical(dec, model, errors_of(model, {a, b}))) << a << " " << b;
        }
    }
}

TEST(decoder, perfect_measurement_toric) {
    NoiseModel n;
    n.p_x = 0.1;
    auto model = build_detector_model(toric_code(4), 1, n);
    UnionFindDecoder dec(model);
    size_t m = model.num_mechanisms();
    size_t live = 0;
    for (size_t a = 0; a < m; a++) {
        if (model.mechanisms[a].probability > 0) {
            EXPECT_FALSE(residual_flips_logical(dec, model, errors_of(model, {a}))) << a;
            live++;
        }
    }
    EXPECT_EQ(live, 64u);
}

TEST(decoder, random_shots_are_valid_and_deterministic) {
    auto model = build_detector_model(repetition_code(10), 10, NoiseModel::phenomenological(0.12));
    UnionFindDecoder dec(model), other(model);
    std::mt19937_64 rng(5);
    std::bernoulli_distribution coin(0.12);
    for (int shot = 0; shot < 300; shot++) {
        BitRow e(model.num_mechanisms());
        for (size_t k = 0; k < e.size(); k++) {
            e.set(k, coin(rng));
        }
        auto det = model.detectors_of(e);
        auto r1 = dec.decode(det);
        ASSERT_EQ(model.detectors_of(as_row(model, r1.correction)), det);
        // A fresh decoder and a reused one agree.
        auto r2 = other.decode(det);
        auto r3 = UnionFindDecoder(model).decode(det);
        ASSERT_EQ(r1.correction, r3.correction);
        ASSERT_EQ(r2.correction, r3.correction);
    }
}

TEST(decoder, infeasible_pattern_is_refused) {
    // Every repetition-code mechanism flips two detectors: odd patterns are
    // outside the image.
    auto model = build_detector_model(repetition_code(6), 4, NoiseModel::phenomenological(0.1));
    BitRow det(model.num_detectors());
    det.set(7, true);
    UnionFindDecoder dec(model);
    EXPECT_THROW(dec.decode(det), std::runtime_error);
    // The decoder stays usable afterwards.
    EXPECT_TRUE(dec.decode(BitRow(model.num_detectors())).correction.empty());
    EXPECT_THROW(dec.decode(BitRow(3)), std::invalid_argument);
}

TEST(decoder, wilson_interval_values) {
    auto r = wilson_interval(5, 10);
    EXPECT_NEAR(r.rate, 0.5, 1e-15);
    EXPECT_NEAR(r.ci_low, 0.2366, 1e-4);
    EXPECT_NEAR(r.ci_high, 0.7634, 1e-4);
    auto zero = wilson_interval(0, 10);
    EXPECT_EQ(zero.ci_low, 0);
    EXPECT_NEAR(zero.ci_high, 1.96 * 1.96 / (10 + 1.96 * 1.96), 1e-12);
    auto all = wilson_interval(10, 10);
    EXPECT_NEAR(all.ci_low, 10 / (10 + 1.96 * 1.96), 1e-12);
    EXPECT_EQ(all.ci_high, 1);
}

TEST(decoder, rate_limits) {
    auto quiet = build_detector_model(repetition_code(8), 8, NoiseModel::phenomenological(0));
    auto r0 = logical_error_rate(quiet, 2000, 1);
    EXPECT_EQ(r0.errors, 0u);
    EXPECT_EQ(r0.rate, 0.0);
    auto loud = build_detector_model(repetition_code(6), 6, NoiseModel::phenomenological(0.5));
    auto r5 = logical_error_rate(loud, 20000, 2);
    EXPECT_LE(r5.ci_low, 0.5);
    EXPECT_GE(r5.ci_high, 0.5);
    EXPECT_THROW(logical_error_rate(quiet, 0, 1), std::invalid_argument);
}

TEST(decoder, rate_is_reproducible_across_jobs) {
    auto model = build_detector_model(repetition_code(8), 8, NoiseModel::phenomenological(0.1));
    auto a = logical_error_rate(model, 5000, 77, 1);
    auto b = logical_error_rate(model, 5000, 77, 3);
    EXPECT_EQ(a.errors, b.errors);
    EXPECT_GT(a.errors, 0u);
}

TEST(decoder, suppression_below_threshold) {
    auto small = build_detector_model(repetition_code(8), 8, NoiseModel::phenomenological(0.05));
    auto large = build_detector_model(repetition_code(16), 16, NoiseModel::phenomenological(0.05));
    auto rs = logical_error_rate(small, 100000, 3);
    auto rl = logical_error_rate(large, 100000, 3);
    EXPECT_GT(rs.errors, 0u);
    EXPECT_LT(rl.ci_high, rs.ci_low);
}

TEST(decoder, threshold_from_synthetic_curves) {
    std::vector<double> ps{0.06, 0.08, 0.10, 0.12, 0.14};
    std::vector<RateCurve> linear;
    for (size_t L : {8, 16, 24}) {
        RateCurve c{L, ps, {}};
        for (auto p : ps) {
            c.rates.push_back(0.2 + (p - 0.10) * static_cast<double>(L) / 4);
        }
        linear.push_back(c);
    }
    auto t = threshold_estimate(linear);
    ASSERT_TRUE(t.ok) << t.failure;
    EXPECT_NEAR(t.estimate, 0.10, 1e-12);
    EXPECT_EQ(t.crossings.size(), 3u);

    std::vector<double> grid{0.07, 0.085, 0.095, 0.11, 0.13};
    std::vector<RateCurve> power;
    for (size_t L : {8, 16}) {
        RateCurve c{L, grid, {}};
        for (auto p : grid) {
            c.rates.push_back(0.3 * std::pow(p / 0.10, static_cast<double>(L) / 4));
        }
        power.push_back(c);
    }
    auto tp = threshold_estimate(power);
    ASSERT_TRUE(tp.ok);
    EXPECT_NEAR(tp.estimate, 0.10, 0.005);
}

TEST(decoder, threshold_failures) {
    std::vector<double> ps{0.06, 0.08, 0.10, 0.12};
    RateCurve a{8, ps, {0.1, 0.2, 0.3, 0.4}};
    RateCurve b{16, ps, {0.05, 0.1, 0.15, 0.2}};
    auto t = threshold_estimate({a, b});
    EXPECT_FALSE(t.ok);
    EXPECT_NE(t.failure.find("no bracketed crossing"), std::string::npos);
    EXPECT_FALSE(threshold_estimate({a}).ok);
    RateCurve short_curve{16, {0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}};
    EXPECT_FALSE(threshold_estimate({a, short_curve}).ok);
}
