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

#include "stm/markov.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace stm;

namespace {

NoiseModel half_noise() {
    NoiseModel n;
    n.p_x = 0.5;
    n.q = 0.5;
    return n;
}

double rank_of(const DetectorModel &model, std::vector<uint32_t> region) {
    return region.empty() ? 0.0 : rank_entropy_half(model, region);
}

double rank_cmi(const DetectorModel &model, const Tripartition &t) {
    auto cat = [](std::vector<uint32_t> a, const std::vector<uint32_t> &b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    return rank_of(model, cat(t.A, t.B)) + rank_of(model, cat(t.B, t.C)) - rank_of(model, t.B) -
           rank_of(model, t.ABC());
}

std::vector<CmiPoint> synthetic(const std::function<double(int)> &f, int lo, int hi, double rel_err = 0) {
    std::vector<CmiPoint> pts;
    for (int d = lo; d <= hi; d++) {
        CmiPoint p;
        p.dist_AC = d;
        p.cmi = f(d);
        p.std_error = rel_err * p.cmi;
        pts.push_back(p);
    }
    return pts;
}

}  // namespace

TEST(markov, square_geometry_counts) {
    auto model = build_detector_model(repetition_code(16), 16, NoiseModel::phenomenological(0.1));
    TripartitionSpec spec;
    spec.wA = 2;
    spec.wB = 1;
    spec.wC = 2;
    spec.width_cap = 64;
    auto t = build_tripartition(model, spec);
    EXPECT_EQ(t.A.size(), 4u);
    EXPECT_EQ(t.B.size(), 12u);
    EXPECT_EQ(t.C.size(), 48u);
    EXPECT_EQ(t.dist_AC, 2);
    std::set<uint32_t> all(t.A.begin(), t.A.end());
    all.insert(t.B.begin(), t.B.end());
    all.insert(t.C.begin(), t.C.end());
    EXPECT_EQ(all.size(), t.width());
    EXPECT_FALSE(mechanism_spans(model, t.A, t.C));
    // Every A-C pair is at least dist_AC apart and some pair attains it.
    auto tri = make_tripartition(model, t.A, t.B, t.C);
    EXPECT_EQ(tri.dist_AC, t.dist_AC);
}

TEST(markov, adjacent_when_no_buffer) {
    auto model = build_detector_model(repetition_code(12), 10, NoiseModel::phenomenological(0.1));
    TripartitionSpec spec;
    spec.wA = 1;
    spec.wB = 0;
    spec.wC = 1;
    auto t = build_tripartition(model, spec);
    EXPECT_EQ(t.dist_AC, 1);
    EXPECT_TRUE(t.B.empty());
    EXPECT_TRUE(mechanism_spans(model, t.A, t.C));
}

TEST(markov, cap_refusal_suggests_smaller_frame) {
    auto model = build_detector_model(repetition_code(20), 10, NoiseModel::phenomenological(0.1));
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.rows = 2;
    spec.wA = 2;
    spec.wB = 1;
    spec.wC = 3;
    spec.width_cap = 16;
    try {
        build_tripartition(model, spec);
        FAIL() << "expected a cap refusal";
    } catch (const std::length_error &e) {
        EXPECT_NE(std::string(e.what()).find("try wC=2"), std::string::npos) << e.what();
    }
    spec.wC = 2;
    EXPECT_EQ(build_tripartition(model, spec).width(), 16u);
}

TEST(markov, geometry_refuses_boundaries_and_wrapping) {
    auto model = build_detector_model(repetition_code(8), 4, NoiseModel::phenomenological(0.1));
    TripartitionSpec spec;
    spec.wA = 1;
    spec.wB = 2;
    spec.wC = 1;
    spec.width_cap = 64;
    EXPECT_THROW(build_tripartition(model, spec), std::invalid_argument);  // rounds out of the bulk
    spec.shape = RegionShape::strip;
    spec.rows = 1;
    spec.wB = 3;
    EXPECT_THROW(build_tripartition(model, spec), std::invalid_argument);  // 1 + 2 * 4 > 8
    EXPECT_THROW(parse_region_shape("disc"), std::invalid_argument);
}

TEST(markov, no_mechanism_bridges_separated_regions) {
    auto model = build_detector_model(repetition_code(14), 12, NoiseModel::phenomenological(0.1));
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; trial++) {
        TripartitionSpec spec;
        spec.shape = rng() % 2 ? RegionShape::square : RegionShape::strip;
        spec.wA = 1 + static_cast<int>(rng() % 2);
        spec.wB = 1 + static_cast<int>(rng() % 2);
        spec.wC = 1 + static_cast<int>(rng() % 2);
        spec.rows = 1 + static_cast<int>(rng() % 3);
        spec.anchor_space = std::array<int, 2>{static_cast<int>(rng() % 14), 0};
        spec.width_cap = 200;
        auto t = build_tripartition(model, spec);
        EXPECT_FALSE(mechanism_spans(model, t.A, t.C)) << t.descriptor;
        EXPECT_EQ(t.dist_AC, spec.wB + 1);
    }
}

TEST(markov, cmi_vanishes_without_noise) {
    auto model = build_detector_model(repetition_code(10), 8, NoiseModel::phenomenological(0));
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.wA = 1;
    auto t = build_tripartition(model, spec);
    for (auto method : {CmiMethod::sampled, CmiMethod::likelihood, CmiMethod::exact}) {
        CmiOptions opt;
        opt.method = method;
        opt.samples = 10000;
        auto c = cmi(model, t, opt);
        EXPECT_EQ(c.cmi, 0.0) << cmi_method_name(method);
        EXPECT_EQ(c.std_error, 0.0);
        EXPECT_FALSE(c.negative);
    }
}

TEST(markov, cmi_vanishes_at_half_on_separating_regions) {
    auto model = build_detector_model(repetition_code(12), 10, half_noise());
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; trial++) {
        TripartitionSpec spec;
        spec.shape = rng() % 2 ? RegionShape::square : RegionShape::strip;
        spec.wA = 1 + static_cast<int>(rng() % 2);
        spec.wB = 1 + static_cast<int>(rng() % 2);
        spec.wC = 1;
        spec.rows = 1 + static_cast<int>(rng() % 2);
        spec.anchor_space = std::array<int, 2>{static_cast<int>(rng() % 12), 0};
        spec.anchor_round = 4 + static_cast<int>(rng() % 2);
        spec.width_cap = 64;
        auto t = build_tripartition(model, spec);
        ASSERT_FALSE(mechanism_spans(model, t.A, t.C));
        EXPECT_EQ(rank_cmi(model, t), 0.0) << t.descriptor;
        if (t.width() <= 20) {
            EXPECT_NEAR(cmi_exact(model, t).cmi, 0.0, 1e-9) << t.descriptor;
        }
    }
}

TEST(markov, symmetric_in_outer_regions) {
    auto model = build_detector_model(repetition_code(10), 8, NoiseModel::phenomenological(0.1));
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.wA = 2;
    auto t = build_tripartition(model, spec);
    auto flipped = make_tripartition(model, t.C, t.B, t.A);
    EXPECT_NEAR(cmi_exact(model, t).cmi, cmi_exact(model, flipped).cmi, 1e-12);
    auto batch = sample_batch(model, t.ABC(), 20000, 1);
    EXPECT_NEAR(cmi_from_batch(batch, t).cmi, cmi_from_batch(batch, flipped).cmi, 1e-12);
    SurprisalCache cache(model, batch);
    EXPECT_NEAR(cmi_likelihood(cache, t).cmi, cmi_likelihood(cache, flipped).cmi, 1e-12);
}

TEST(markov, estimators_agree_with_exact_on_small_regions) {
    auto model = build_detector_model(repetition_code(4), 3, NoiseModel::phenomenological(0.1));
    std::mt19937_64 rng(12);
    int tested = 0;
    for (int trial = 0; tested < 10 && trial < 200; trial++) {
        std::vector<uint32_t> A, B, C;
        for (uint32_t d = 0; d < model.num_detectors(); d++) {
            switch (rng() % 4) {
                case 0: A.push_back(d); break;
                case 1: B.push_back(d); break;
                case 2: C.push_back(d); break;
                default: break;
            }
        }
        if (A.empty() || C.empty()) {
            continue;
        }
        auto t = make_tripartition(model, A, B, C);
        double exact = cmi_exact(model, t).cmi;
        CmiOptions opt;
        opt.samples = 1000000;
        opt.seed = 100 + static_cast<uint64_t>(trial);
        auto s = cmi(model, t, opt);
        // 1e-12 absorbs roundoff when the exact value is zero.
        EXPECT_NEAR(s.cmi, exact, 3 * s.std_error + 1e-12) << t.descriptor;
        opt.method = CmiMethod::likelihood;
        opt.samples = 100000;
        auto l = cmi(model, t, opt);
        EXPECT_NEAR(l.cmi, exact, 3 * l.std_error + 1e-12) << t.descriptor;
        tested++;
    }
    EXPECT_EQ(tested, 10);
}

TEST(markov, likelihood_matches_exact_marginal) {
    auto model = build_detector_model(repetition_code(10), 8, NoiseModel::phenomenological(0.12));
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.rows = 3;
    spec.wA = 1;
    spec.wB = 1;
    spec.wC = 1;
    auto region = build_tripartition(model, spec).ABC();
    ASSERT_EQ(region.size(), 15u);
    RegionLikelihood lik(model, region);
    EXPECT_EQ(lik.window(), 4u);
    auto dist = exact_marginal(model, region);
    for (uint64_t x = 0; x < dist.prob.size(); x++) {
        ASSERT_NEAR(lik.log2_prob(x), std::log2(dist.prob[x]), 1e-9) << x;
    }
}

TEST(markov, likelihood_entropy_tracks_exact_ladder) {
    auto model = build_detector_model(repetition_code(12), 8, NoiseModel::phenomenological(0.1));
    LadderSpec ladder;
    ladder.base.shape = RegionShape::strip;
    ladder.base.rows = 2;
    ladder.base.wA = 1;
    ladder.base.wC = 1;
    ladder.wB_min = 1;
    ladder.wB_max = 3;
    auto rungs = build_ladder(model, ladder);
    CmiOptions opt;
    opt.method = CmiMethod::exact;
    auto exact = cmi_ladder(model, rungs, opt);
    opt.method = CmiMethod::likelihood;
    opt.samples = 300000;
    auto est = cmi_ladder(model, rungs, opt);
    ASSERT_EQ(est.size(), 3u);
    for (size_t k = 0; k < 3; k++) {
        EXPECT_NEAR(est[k].cmi, exact[k].cmi, 3 * est[k].std_error) << k;
        EXPECT_EQ(est[k].dist_AC, exact[k].dist_AC);
    }
}

TEST(markov, ladder_shares_one_batch) {
    auto model = build_detector_model(repetition_code(16), 8, NoiseModel::phenomenological(0.1));
    LadderSpec ladder;
    ladder.base.shape = RegionShape::strip;
    ladder.base.rows = 1;
    ladder.base.wA = 2;
    ladder.wB_min = 1;
    ladder.wB_max = 4;
    auto rungs = build_ladder(model, ladder);
    CmiOptions opt;
    opt.samples = 50000;
    opt.seed = 9;
    auto pts = cmi_ladder(model, rungs, opt);
    auto batch = sample_batch(model, ladder_region(rungs), opt.samples, opt.seed);
    for (size_t k = 0; k < rungs.size(); k++) {
        EXPECT_EQ(pts[k].cmi, cmi_from_batch(batch, rungs[k], opt).cmi);
        EXPECT_EQ(pts[k].wB, static_cast<int>(k) + 1);
    }
}

TEST(markov, fit_recovers_synthetic_lengths) {
    auto half = markov_length(synthetic([](int d) { return std::pow(2.0, -d / 2.0); }, 1, 5));
    ASSERT_TRUE(half.ok) << half.failure;
    EXPECT_NEAR(half.xi, 2 / std::log(2.0), 1e-9);
    EXPECT_NEAR(half.slope_log2, -0.5, 1e-12);
    EXPECT_NEAR(half.r2, 1.0, 1e-12);
    auto unit = markov_length(synthetic([](int d) { return std::exp(-d); }, 1, 5));
    EXPECT_NEAR(unit.xi, 1.0, 1e-9);
    EXPECT_EQ(unit.window_lo, 1);
    EXPECT_EQ(unit.window_hi, 5);
    // Weighted fit with proportional errors keeps the slope.
    auto weighted = markov_length(synthetic([](int d) { return 3 * std::exp(-d / 1.7); }, 1, 6, 0.05));
    EXPECT_NEAR(weighted.xi, 1.7, 1e-9);
    EXPECT_NEAR(weighted.xi_stderr, 1.7 * 1.7 * 0.05 / std::sqrt(17.5), 1e-9);
}

TEST(markov, fit_refusals) {
    auto noise = synthetic([](int) { return 1e-4; }, 1, 5);
    for (auto &p : noise) {
        p.std_error = 1e-3;
    }
    auto f = markov_length(noise);
    EXPECT_FALSE(f.ok);
    EXPECT_NE(f.failure.find("fewer than 3"), std::string::npos);
    EXPECT_FALSE(markov_length(synthetic([](int d) { return std::exp(-d); }, 1, 2)).ok);
    auto growing = markov_length(synthetic([](int d) { return std::exp(d); }, 1, 4));
    EXPECT_FALSE(growing.ok);
    EXPECT_NE(growing.failure.find("does not decay"), std::string::npos);
    auto zeros = markov_length(synthetic([](int) { return 0.0; }, 1, 5));
    EXPECT_FALSE(zeros.ok);
}

TEST(markov, peak_interpolation) {
    std::vector<double> xs{0.05, 0.07, 0.09, 0.11, 0.13};
    std::vector<double> ys;
    for (auto x : xs) {
        ys.push_back(2 - 100 * (x - 0.1) * (x - 0.1));
    }
    auto pk = find_peak(xs, ys);
    EXPECT_TRUE(pk.interior);
    EXPECT_NEAR(pk.location, 0.1, 1e-12);
    EXPECT_NEAR(pk.height, 2.0, 1e-12);

    std::vector<double> rising{1, 2, 3, 4, 5};
    auto edge = find_peak(xs, rising);
    EXPECT_FALSE(edge.interior);
    EXPECT_EQ(edge.note, "no interior maximum");
    EXPECT_EQ(edge.location, 0.13);

    std::vector<double> gaps{1, NAN, 3, 2, NAN};
    auto g = find_peak(xs, gaps);
    EXPECT_TRUE(g.interior);
    EXPECT_GE(g.location, 0.05);
    EXPECT_LE(g.location, 0.11);
}

// Regression guard from the design notes: CMI of a fixed bulk geometry is
// expected to be larger at p = 0.10 than at p = 0.02. The exact oracle
// (companion test below) says otherwise for this noise model.
TEST(markov, cmi_grows_with_noise_in_the_bulk) {
    auto lo = build_detector_model(repetition_code(16), 16, NoiseModel::phenomenological(0.02));
    auto hi = build_detector_model(repetition_code(16), 16, NoiseModel::phenomenological(0.10));
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.rows = 2;
    spec.wA = 1;
    spec.wB = 1;
    spec.wC = 1;
    CmiOptions opt;
    opt.samples = 1000000;
    opt.seed = 5;
    auto a = cmi(lo, build_tripartition(lo, spec), opt);
    auto b = cmi(hi, build_tripartition(hi, spec), opt);
    EXPECT_LT(a.cmi + 3 * a.std_error, b.cmi - 3 * b.std_error);
}

TEST(markov, fixed_geometry_cmi_against_exact_at_two_rates) {
    TripartitionSpec spec;
    spec.shape = RegionShape::strip;
    spec.rows = 2;
    spec.wA = 1;
    spec.wB = 1;
    spec.wC = 1;
    CmiOptions opt;
    opt.samples = 1000000;
    opt.seed = 5;
    for (double p : {0.02, 0.10}) {
        auto model = build_detector_model(repetition_code(16), 16, NoiseModel::phenomenological(p));
        auto t = build_tripartition(model, spec);
        auto s = cmi(model, t, opt);
        // 4 sigma: several of these comparisons share the suite, and this
        // one only has to show which side of the guard the truth lies on.
        EXPECT_NEAR(s.cmi, cmi_exact(model, t).cmi, 4 * s.std_error) << p;
    }
}
