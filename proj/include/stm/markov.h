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

#ifndef _STM_MARKOV_H
#define _STM_MARKOV_H

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stm/entropy.h"
#include "stm/sampler.h"
#include "stm/spacetime.h"

namespace stm {

/// `square`: nested boxes in all spacetime directions (A a cube of side wA,
/// B and C Chebyshev shells around it). `strip`: the same nesting in space
/// only, on a band of `rows` consecutive detector rounds.
enum class RegionShape { square, strip };

inline const char *region_shape_name(RegionShape s) {
    return s == RegionShape::square ? "square" : "strip";
}

inline RegionShape parse_region_shape(const std::string &s) {
    if (s == "square") {
        return RegionShape::square;
    }
    if (s == "strip") {
        return RegionShape::strip;
    }
    throw std::invalid_argument("unknown region shape '" + s + "' (supported: square, strip)");
}

struct TripartitionSpec {
    RegionShape shape = RegionShape::square;
    int wA = 2;
    int wB = 1;
    int wC = 2;
    int rows = 2;
    /// Spatial anchor (check-lattice units) and anchor round; default is the centre.
    std::optional<std::array<int, 2>> anchor_space;
    std::optional<int> anchor_round;
    size_t width_cap = kDefaultPatternCap;
};

struct Tripartition {
    std::vector<uint32_t> A, B, C;
    int dist_AC = 0;
    TripartitionSpec spec;
    std::string descriptor;

    std::vector<uint32_t> ABC() const {
        std::vector<uint32_t> out = A;
        out.insert(out.end(), B.begin(), B.end());
        out.insert(out.end(), C.begin(), C.end());
        return out;
    }
    size_t width() const {
        return A.size() + B.size() + C.size();
    }
};

/// Separation checks: disjointness, and whether any mechanism touches both A and C.
inline bool mechanism_spans(const DetectorModel &model, std::span<const uint32_t> X, std::span<const uint32_t> Y) {
    auto in = [](std::span<const uint32_t> set, uint32_t d) {
        return std::find(set.begin(), set.end(), d) != set.end();
    };
    for (auto d : X) {
        for (auto k : model.detector_mechanisms.at(d)) {
            for (auto e : model.mechanisms[k].detectors) {
                if (in(Y, e)) {
                    return true;
                }
            }
        }
    }
    return false;
}

/// Tripartition from explicit detector sets; dist_AC is the smallest Chebyshev
/// distance between A and C.
inline Tripartition make_tripartition(const DetectorModel &model, std::vector<uint32_t> A, std::vector<uint32_t> B,
                                      std::vector<uint32_t> C) {
    Tripartition t;
    t.A = std::move(A);
    t.B = std::move(B);
    t.C = std::move(C);
    auto all = t.ABC();
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
        throw std::invalid_argument("make_tripartition: A, B, C overlap");
    }
    for (auto d : all) {
        if (d >= model.num_detectors()) {
            throw std::out_of_range("make_tripartition: detector " + std::to_string(d) + " out of range");
        }
    }
    t.dist_AC = std::numeric_limits<int>::max();
    for (auto a : t.A) {
        for (auto c : t.C) {
            t.dist_AC = std::min(t.dist_AC, model.distance(a, c));
        }
    }
    if (t.A.empty() || t.C.empty()) {
        t.dist_AC = 0;
    }
    t.descriptor = "custom |A|=" + std::to_string(t.A.size()) + " |B|=" + std::to_string(t.B.size()) +
                   " |C|=" + std::to_string(t.C.size());
    return t;
}

/// Nested A / B / C regions of the Z-type detectors (the X-type sector carries
/// no mechanisms under the default noise and is excluded).
inline Tripartition build_tripartition(const DetectorModel &model, const TripartitionSpec &spec) {
    const auto &code = model.code;
    if (spec.wA < 1 || spec.wB < 0 || spec.wC < 1 || spec.rows < 1) {
        throw std::invalid_argument("build_tripartition: need wA >= 1, wB >= 0, wC >= 1, rows >= 1");
    }
    size_t dims = code.geometry.dims;
    int T = static_cast<int>(model.rounds);
    int reach = spec.wB + spec.wC;
    std::array<int, 2> period{code.geometry.extent[0] / 2, code.geometry.extent[1] / 2};
    std::array<int, 2> anchor{period[0] / 2, period[1] / 2};
    if (spec.anchor_space) {
        anchor = *spec.anchor_space;
    }
    int t_anchor = spec.anchor_round.value_or(T / 2);

    // Extent along each axis as [lo, lo + len) around A's lower corner.
    int a0_t;
    int t_lo, t_hi;
    bool time_nested = spec.shape == RegionShape::square;
    if (time_nested) {
        a0_t = t_anchor - (spec.wA - 1) / 2;
        t_lo = a0_t - reach;
        t_hi = a0_t + spec.wA + reach;
    } else {
        a0_t = t_anchor - (spec.rows - 1) / 2;
        t_lo = a0_t;
        t_hi = a0_t + spec.rows;
    }
    if (t_lo < 1 || t_hi > T) {
        throw std::invalid_argument("build_tripartition: regions span rounds [" + std::to_string(t_lo) + ", " +
                                    std::to_string(t_hi - 1) + "], outside the bulk rounds [1, " +
                                    std::to_string(T - 1) + "]");
    }
    for (size_t a = 0; a < dims; a++) {
        if (spec.wA + 2 * reach > period[a]) {
            throw std::invalid_argument("build_tripartition: regions of side " + std::to_string(spec.wA + 2 * reach) +
                                        " wrap around the periodic size " + std::to_string(period[a]));
        }
    }

    // Shell index of a detector: 0 inside A, k for Chebyshev distance k from A.
    std::array<int, 2> a0{anchor[0] - (spec.wA - 1) / 2, anchor[1] - (spec.wA - 1) / 2};
    auto axis_gap = [](int x, int lo, int len) {
        if (x < lo) {
            return lo - x;
        }
        if (x >= lo + len) {
            return x - (lo + len - 1);
        }
        return 0;
    };
    Tripartition tri;
    tri.spec = spec;
    tri.dist_AC = spec.wB + 1;
    for (size_t d = 0; d < model.num_detectors(); d++) {
        const auto &det = model.detectors[d];
        if (!det.z_type) {
            continue;
        }
        int t = static_cast<int>(det.round);
        if (t < t_lo || t >= t_hi) {
            continue;
        }
        int shell = time_nested ? axis_gap(t, a0_t, spec.wA) : 0;
        for (size_t a = 0; a < dims; a++) {
            // Unwrap the periodic coordinate to the copy nearest A.
            int x = det.position[a];
            int centre = a0[a] + spec.wA / 2;
            int diff = ((x - centre) % period[a] + period[a]) % period[a];
            if (diff > period[a] / 2) {
                diff -= period[a];
            }
            shell = std::max(shell, axis_gap(centre + diff, a0[a], spec.wA));
        }
        auto id = static_cast<uint32_t>(d);
        if (shell == 0) {
            tri.A.push_back(id);
        } else if (shell <= spec.wB) {
            tri.B.push_back(id);
        } else if (shell <= reach) {
            tri.C.push_back(id);
        }
    }
    if (tri.width() > spec.width_cap) {
        std::string suggestion = "no smaller wC fits";
        for (int wc = spec.wC - 1; wc >= 1; wc--) {
            auto smaller = spec;
            smaller.wC = wc;
            smaller.width_cap = std::numeric_limits<size_t>::max();
            if (build_tripartition(model, smaller).width() <= spec.width_cap) {
                suggestion = "try wC=" + std::to_string(wc);
                break;
            }
        }
        throw std::length_error("build_tripartition: |A u B u C| = " + std::to_string(tri.width()) +
                                " exceeds the width cap of " + std::to_string(spec.width_cap) + " bits; " +
                                suggestion);
    }
    tri.descriptor = std::string(region_shape_name(spec.shape)) + " wA=" + std::to_string(spec.wA) +
                     " wB=" + std::to_string(spec.wB) + " wC=" + std::to_string(spec.wC) +
                     (time_nested ? "" : " rows=" + std::to_string(spec.rows)) + " t0=" + std::to_string(t_anchor);
    return tri;
}

struct CmiPoint {
    int dist_AC = 0;
    double cmi = 0;
    double std_error = 0;
    int wA = 0;
    int wB = 0;
    /// Set when the estimate is negative (noise floor); the value is not clamped.
    bool negative = false;
    std::string region;
};

/// sampled: plug-in entropies of the sample histograms. likelihood: sample
/// means of -log2 P(pattern) with P evaluated exactly (no histogram, no plug-in
/// bias; needs a narrow elimination window). exact: full distributions.
enum class CmiMethod { sampled, likelihood, exact };

inline const char *cmi_method_name(CmiMethod m) {
    return m == CmiMethod::sampled ? "sampled" : m == CmiMethod::likelihood ? "likelihood" : "exact";
}

inline CmiMethod parse_cmi_method(const std::string &s) {
    if (s == "sampled") {
        return CmiMethod::sampled;
    }
    if (s == "likelihood") {
        return CmiMethod::likelihood;
    }
    if (s == "exact") {
        return CmiMethod::exact;
    }
    throw std::invalid_argument("unknown cmi method '" + s + "' (supported: sampled, likelihood, exact)");
}

struct CmiOptions {
    CmiMethod method = CmiMethod::sampled;
    size_t samples = 1000000;
    uint64_t seed = 0;
    size_t jobs = 1;
    Correction correction = Correction::miller_madow;
    size_t groups = 32;
    size_t pattern_cap = kDefaultPatternCap;
    size_t exact_cap = kExactWidthCap;
};

namespace internal {

inline std::vector<size_t> positions_in(const SampleBatch &batch, std::span<const uint32_t> detectors) {
    std::vector<size_t> out;
    for (auto d : detectors) {
        size_t p = batch.position_of(d);
        if (p == batch.width()) {
            throw std::invalid_argument("detector " + std::to_string(d) + " is not in the sample batch");
        }
        out.push_back(p);
    }
    return out;
}

inline CmiPoint point_of(const Tripartition &tri, double cmi, double se) {
    CmiPoint p;
    p.dist_AC = tri.dist_AC;
    p.cmi = cmi;
    p.std_error = se;
    p.wA = tri.spec.wA;
    p.wB = tri.spec.wB;
    p.negative = cmi < 0;
    p.region = tri.descriptor;
    return p;
}

}  // namespace internal

/// I(A:C|B) = H(AB) + H(BC) - H(B) - H(ABC) from one batch, with a jackknife
/// error over contiguous sample groups applied to the combined statistic.
inline CmiPoint cmi_from_batch(const SampleBatch &batch, const Tripartition &tri, const CmiOptions &opt = {}) {
    auto pa = internal::positions_in(batch, tri.A);
    auto pb = internal::positions_in(batch, tri.B);
    auto pc = internal::positions_in(batch, tri.C);
    check_pattern_cap(pa.size() + pb.size() + pc.size(), opt.pattern_cap);
    auto concat = [](std::initializer_list<const std::vector<size_t> *> parts) {
        std::vector<size_t> out;
        for (auto p : parts) {
            out.insert(out.end(), p->begin(), p->end());
        }
        return out;
    };
    struct Term {
        std::vector<size_t> cols;
        double sign;
    };
    std::vector<Term> terms{
        {concat({&pa, &pb}), +1},
        {concat({&pb, &pc}), +1},
        {pb, -1},
        {concat({&pa, &pb, &pc}), -1},
    };
    double full = 0;
    std::vector<double> reps;
    for (const auto &term : terms) {
        if (term.cols.empty()) {
            continue;
        }
        auto keys = pattern_keys(batch, term.cols);
        auto jk = jackknife_entropy(keys, term.cols.size(), opt.groups, opt.correction);
        full += term.sign * jk.full.value;
        if (reps.empty()) {
            reps.assign(jk.leave_one_out.size(), 0);
        }
        for (size_t g = 0; g < jk.leave_one_out.size(); g++) {
            reps[g] += term.sign * jk.leave_one_out[g];
        }
    }
    return internal::point_of(tri, full, jackknife_stderr(reps));
}

/// Per-sample surprisals of detector subsets of one batch, cached by subset so
/// nested ladders evaluate each distinct region once.
class SurprisalCache {
   public:
    SurprisalCache(const DetectorModel &model, const SampleBatch &batch) : model_(model), batch_(batch) {
    }

    const std::vector<double> &of(std::vector<uint32_t> detectors) {
        std::sort(detectors.begin(), detectors.end());
        auto it = cache_.find(detectors);
        if (it != cache_.end()) {
            return it->second;
        }
        auto cols = internal::positions_in(batch_, detectors);
        RegionLikelihood lik(model_, detectors);
        auto keys = pattern_keys(batch_, cols);
        return cache_.emplace(detectors, surprisal(lik, keys)).first->second;
    }

   private:
    const DetectorModel &model_;
    const SampleBatch &batch_;
    std::map<std::vector<uint32_t>, std::vector<double>> cache_;
};

/// CMI as the sample mean of the pointwise conditional mutual information
/// log2 P(abc) P(b) / (P(ab) P(bc)).
inline CmiPoint cmi_likelihood(SurprisalCache &cache, const Tripartition &tri, const CmiOptions &opt = {}) {
    auto join = [](std::initializer_list<const std::vector<uint32_t> *> parts) {
        std::vector<uint32_t> out;
        for (auto p : parts) {
            out.insert(out.end(), p->begin(), p->end());
        }
        return out;
    };
    const auto &h_ab = cache.of(join({&tri.A, &tri.B}));
    const auto &h_bc = cache.of(join({&tri.B, &tri.C}));
    const auto &h_abc = cache.of(tri.ABC());
    std::vector<double> pointwise(h_ab.size());
    for (size_t i = 0; i < pointwise.size(); i++) {
        pointwise[i] = h_ab[i] + h_bc[i] - h_abc[i];
    }
    if (!tri.B.empty()) {
        const auto &h_b = cache.of(tri.B);
        for (size_t i = 0; i < pointwise.size(); i++) {
            pointwise[i] -= h_b[i];
        }
    }
    auto m = grouped_mean(pointwise, opt.groups);
    return internal::point_of(tri, m.mean, m.std_error);
}

inline CmiPoint cmi_exact(const DetectorModel &model, const Tripartition &tri, size_t width_cap = kExactWidthCap) {
    auto region = tri.ABC();
    auto dist = exact_marginal(model, region, width_cap);
    size_t na = tri.A.size(), nb = tri.B.size(), nc = tri.C.size();
    auto range = [](size_t lo, size_t hi) {
        std::vector<size_t> out;
        for (size_t k = lo; k < hi; k++) {
            out.push_back(k);
        }
        return out;
    };
    double h_abc = dist.entropy();
    double h_ab = dist.project(range(0, na + nb)).entropy();
    double h_bc = dist.project(range(na, na + nb + nc)).entropy();
    double h_b = dist.project(range(na, na + nb)).entropy();
    return internal::point_of(tri, h_ab + h_bc - h_b - h_abc, 0);
}

inline CmiPoint cmi(const DetectorModel &model, const Tripartition &tri, const CmiOptions &opt) {
    if (opt.method == CmiMethod::exact) {
        return cmi_exact(model, tri, opt.exact_cap);
    }
    auto region = tri.ABC();
    if (opt.method == CmiMethod::sampled) {
        check_pattern_cap(tri.width(), opt.pattern_cap);
    }
    auto batch = sample_batch(model, region, opt.samples, opt.seed, "sampling", opt.jobs);
    if (opt.method == CmiMethod::likelihood) {
        SurprisalCache cache(model, batch);
        return cmi_likelihood(cache, tri, opt);
    }
    return cmi_from_batch(batch, tri, opt);
}

/// A ladder of tripartitions sharing A, with wB = wB_min..wB_max.
struct LadderSpec {
    TripartitionSpec base;
    int wB_min = 1;
    int wB_max = 5;
};

inline std::vector<Tripartition> build_ladder(const DetectorModel &model, const LadderSpec &ladder) {
    if (ladder.wB_min < 0 || ladder.wB_max < ladder.wB_min) {
        throw std::invalid_argument("build_ladder: need 0 <= wB_min <= wB_max");
    }
    std::vector<Tripartition> out;
    for (int wb = ladder.wB_min; wb <= ladder.wB_max; wb++) {
        auto spec = ladder.base;
        spec.wB = wb;
        out.push_back(build_tripartition(model, spec));
    }
    return out;
}

/// Union of the ladder's regions: the outermost rung contains all smaller ones.
inline std::vector<uint32_t> ladder_region(const std::vector<Tripartition> &rungs) {
    std::vector<uint32_t> all;
    for (const auto &t : rungs) {
        auto r = t.ABC();
        all.insert(all.end(), r.begin(), r.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

/// CMI of every rung from one batch covering all of them.
inline std::vector<CmiPoint> cmi_ladder_from_batch(const DetectorModel &model, const SampleBatch &batch,
                                                   const std::vector<Tripartition> &rungs, const CmiOptions &opt) {
    std::vector<CmiPoint> out;
    if (opt.method == CmiMethod::likelihood) {
        SurprisalCache cache(model, batch);
        for (const auto &t : rungs) {
            out.push_back(cmi_likelihood(cache, t, opt));
        }
        return out;
    }
    for (const auto &t : rungs) {
        out.push_back(cmi_from_batch(batch, t, opt));
    }
    return out;
}

/// CMI along a ladder. Sampled ladders share one batch over the union region,
/// so the same batch can be exported and re-analysed.
inline std::vector<CmiPoint> cmi_ladder(const DetectorModel &model, const std::vector<Tripartition> &rungs,
                                        const CmiOptions &opt) {
    std::vector<CmiPoint> out;
    if (opt.method == CmiMethod::exact) {
        for (const auto &t : rungs) {
            out.push_back(cmi_exact(model, t, opt.exact_cap));
        }
        return out;
    }
    auto region = ladder_region(rungs);
    auto batch = sample_batch(model, region, opt.samples, opt.seed, "sampling", opt.jobs);
    return cmi_ladder_from_batch(model, batch, rungs, opt);
}

struct MarkovFit {
    bool ok = false;
    std::string failure;
    /// e-folding length: I ~ exp(-dist / xi).
    double xi = 0;
    double xi_stderr = 0;
    double slope_ln = 0;
    double slope_log2 = 0;
    double intercept_ln = 0;
    double r2 = 0;
    int window_lo = 0;
    int window_hi = 0;
    size_t used = 0;
    std::vector<CmiPoint> points;
};

/// Points with cmi above this (when std_error is 0) count as nonzero.
inline constexpr double kExactCmiFloor = 1e-12;

/// Weighted least squares of ln(cmi) against dist; weights (cmi / std_error)^2
/// (the inverse variance of ln cmi), or uniform when errors are zero.
inline MarkovFit markov_length(const std::vector<CmiPoint> &points) {
    MarkovFit fit;
    fit.points = points;
    std::vector<double> xs, ys, sig;
    for (const auto &p : points) {
        bool usable = p.std_error > 0 ? p.cmi > 3 * p.std_error : p.cmi > kExactCmiFloor;
        if (!usable) {
            continue;
        }
        xs.push_back(p.dist_AC);
        ys.push_back(std::log(p.cmi));
        sig.push_back(p.std_error / p.cmi);
    }
    fit.used = xs.size();
    if (xs.size() < 3) {
        fit.failure = "fewer than 3 usable points above the noise floor (" + std::to_string(xs.size()) + " of " +
                      std::to_string(points.size()) + ")";
        return fit;
    }
    // Inverse-variance weights only when every usable point carries an error.
    bool weighted = std::all_of(sig.begin(), sig.end(), [](double s) {
        return s > 0;
    });
    std::vector<double> ws;
    for (auto s : sig) {
        ws.push_back(weighted ? 1 / (s * s) : 1.0);
    }
    double sw = 0, sx = 0, sy = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        sw += ws[i];
        sx += ws[i] * xs[i];
        sy += ws[i] * ys[i];
    }
    double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
        sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
        syy += ws[i] * (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0) {
        fit.failure = "usable points share a single distance";
        return fit;
    }
    double slope = sxy / sxx;
    double intercept = my - slope * mx;
    double ss_res = 0;
    for (size_t i = 0; i < xs.size(); i++) {
        double r = ys[i] - (intercept + slope * xs[i]);
        ss_res += ws[i] * r * r;
    }
    fit.slope_ln = slope;
    fit.slope_log2 = slope / std::numbers::ln2;
    fit.intercept_ln = intercept;
    fit.r2 = syy > 0 ? 1 - ss_res / syy : 1.0;
    fit.window_lo = static_cast<int>(*std::min_element(xs.begin(), xs.end()));
    fit.window_hi = static_cast<int>(*std::max_element(xs.begin(), xs.end()));
    if (!(slope < 0)) {
        fit.failure = "cmi does not decay with distance (slope " + format_double(slope) + ")";
        return fit;
    }
    double var_slope = weighted ? 1 / sxx : (xs.size() > 2 ? ss_res / static_cast<double>(xs.size() - 2) / sxx : 0);
    fit.xi = -1 / slope;
    fit.xi_stderr = std::sqrt(var_slope) / (slope * slope);
    fit.ok = true;
    return fit;
}

/// Location of the largest value along a grid, refined by the parabola through
/// it and its neighbours. Non-finite entries are gaps.
struct PeakEstimate {
    bool interior = false;
    double location = std::numeric_limits<double>::quiet_NaN();
    double height = std::numeric_limits<double>::quiet_NaN();
    double height_stderr = 0;
    size_t grid_index = 0;
    std::string note;
};

inline PeakEstimate find_peak(std::span<const double> xs, std::span<const double> ys,
                              std::span<const double> y_errors = {}) {
    PeakEstimate pk;
    std::vector<size_t> valid;
    for (size_t i = 0; i < xs.size(); i++) {
        if (std::isfinite(ys[i])) {
            valid.push_back(i);
        }
    }
    if (valid.empty()) {
        pk.note = "no finite values";
        return pk;
    }
    size_t best = 0;
    for (size_t k = 1; k < valid.size(); k++) {
        if (ys[valid[k]] > ys[valid[best]]) {
            best = k;
        }
    }
    size_t i = valid[best];
    pk.grid_index = i;
    pk.location = xs[i];
    pk.height = ys[i];
    pk.height_stderr = y_errors.empty() ? 0 : y_errors[i];
    if (best == 0 || best + 1 == valid.size()) {
        pk.note = "no interior maximum";
        return pk;
    }
    double x0 = xs[valid[best - 1]], x1 = xs[i], x2 = xs[valid[best + 1]];
    double y0 = ys[valid[best - 1]], y1 = ys[i], y2 = ys[valid[best + 1]];
    // Newton form of the interpolating parabola.
    double d01 = (y1 - y0) / (x1 - x0);
    double d12 = (y2 - y1) / (x2 - x1);
    double a = (d12 - d01) / (x2 - x0);
    pk.interior = true;
    if (a < 0) {
        double b = d01 - a * (x0 + x1);
        double xv = -b / (2 * a);
        pk.location = std::clamp(xv, x0, x2);
        pk.height = y0 + d01 * (pk.location - x0) + a * (pk.location - x0) * (pk.location - x1);
    }
    return pk;
}

}  // namespace stm

#endif
