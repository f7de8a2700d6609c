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

#ifndef _STM_ENTROPY_H
#define _STM_ENTROPY_H

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <map>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stm/gf2.h"
#include "stm/sampler.h"
#include "stm/spacetime.h"

namespace stm {

enum class Correction { none, miller_madow };

inline const char *correction_name(Correction c) {
    return c == Correction::none ? "none" : "miller_madow";
}

struct EntropyEstimate {
    double value = 0;
    double std_error = 0;
    Correction correction = Correction::none;
    uint64_t n_samples = 0;
    size_t support = 0;
    size_t width = 0;
};

namespace internal {

inline double finish_entropy(double sum_c_ln_c, uint64_t n, size_t support, Correction corr, size_t width) {
    double nd = static_cast<double>(n);
    double h = (std::log(nd) - sum_c_ln_c / nd) / std::numbers::ln2;
    if (corr == Correction::miller_madow) {
        h += (static_cast<double>(support) - 1) / (2 * nd * std::numbers::ln2);
    }
    return std::clamp(h, 0.0, static_cast<double>(width));
}

inline double c_ln_c(uint64_t c) {
    return c ? static_cast<double>(c) * std::log(static_cast<double>(c)) : 0.0;
}

}  // namespace internal

inline EntropyEstimate plugin_entropy(const Histogram &h, Correction corr = Correction::none) {
    if (h.total == 0) {
        throw std::invalid_argument("plugin_entropy: no samples (n = 0)");
    }
    double s = 0;
    uint64_t sum = 0;
    size_t support = 0;
    for (auto [pattern, c] : h.entries) {
        s += internal::c_ln_c(c);
        sum += c;
        support += c > 0;
    }
    if (sum != h.total) {
        throw std::invalid_argument("plugin_entropy: counts sum to " + std::to_string(sum) + ", not n = " +
                                    std::to_string(h.total));
    }
    EntropyEstimate e;
    e.value = internal::finish_entropy(s, h.total, support, corr, h.width);
    e.correction = corr;
    e.n_samples = h.total;
    e.support = support;
    e.width = h.width;
    return e;
}

inline EntropyEstimate plugin_entropy(const std::map<uint64_t, uint64_t> &counts, uint64_t n,
                                      Correction corr = Correction::none, size_t width = 64) {
    Histogram h;
    h.width = width;
    h.total = n;
    for (auto [k, c] : counts) {
        h.entries.push_back({k, c});
    }
    return plugin_entropy(h, corr);
}

/// Plug-in entropy together with its delete-one-group jackknife replicates.
/// Group g holds the contiguous samples [g n / G, (g + 1) n / G).
struct JackknifeEntropy {
    EntropyEstimate full;
    std::vector<double> leave_one_out;
};

inline std::vector<size_t> jackknife_bounds(size_t n, size_t groups) {
    std::vector<size_t> b(groups + 1);
    for (size_t g = 0; g <= groups; g++) {
        b[g] = n * g / groups;
    }
    return b;
}

inline double jackknife_stderr(std::span<const double> replicates) {
    size_t g = replicates.size();
    if (g < 2) {
        return 0;
    }
    double mean = 0;
    for (auto v : replicates) {
        mean += v;
    }
    mean /= static_cast<double>(g);
    double ss = 0;
    for (auto v : replicates) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss * static_cast<double>(g - 1) / static_cast<double>(g));
}

inline JackknifeEntropy jackknife_entropy(std::span<const uint64_t> keys, size_t width, size_t groups = 32,
                                          Correction corr = Correction::miller_madow) {
    size_t n = keys.size();
    if (n == 0) {
        throw std::invalid_argument("jackknife_entropy: no samples (n = 0)");
    }
    if (width > 58) {
        throw std::invalid_argument("jackknife_entropy: width above 58 bits");
    }
    if (groups > 64) {
        throw std::invalid_argument("jackknife_entropy: at most 64 groups");
    }
    groups = std::max<size_t>(1, std::min(groups, n));
    auto bounds = jackknife_bounds(n, groups);
    std::vector<uint64_t> tagged(n);
    for (size_t g = 0; g < groups; g++) {
        for (size_t i = bounds[g]; i < bounds[g + 1]; i++) {
            tagged[i] = (keys[i] << 6) | g;
        }
    }
    std::sort(tagged.begin(), tagged.end());

    double s_total = 0;
    size_t support = 0;
    std::vector<double> delta(groups, 0);  // c ln c - (c - c_g) ln (c - c_g), summed per group
    std::vector<size_t> lost(groups, 0);   // patterns seen only in group g
    for (size_t i = 0; i < n;) {
        uint64_t key = tagged[i] >> 6;
        size_t j = i;
        while (j < n && (tagged[j] >> 6) == key) {
            j++;
        }
        uint64_t c = j - i;
        double clc = internal::c_ln_c(c);
        s_total += clc;
        support++;
        for (size_t a = i; a < j;) {
            uint64_t g = tagged[a] & 63;
            size_t b = a;
            while (b < j && (tagged[b] & 63) == g) {
                b++;
            }
            uint64_t cg = b - a;
            delta[g] += clc - internal::c_ln_c(c - cg);
            lost[g] += cg == c;
            a = b;
        }
        i = j;
    }

    JackknifeEntropy out;
    out.full.value = internal::finish_entropy(s_total, n, support, corr, width);
    out.full.correction = corr;
    out.full.n_samples = n;
    out.full.support = support;
    out.full.width = width;
    if (groups > 1) {
        for (size_t g = 0; g < groups; g++) {
            uint64_t ng = n - (bounds[g + 1] - bounds[g]);
            out.leave_one_out.push_back(internal::finish_entropy(s_total - delta[g], ng, support - lost[g], corr, width));
        }
        out.full.std_error = jackknife_stderr(out.leave_one_out);
    }
    return out;
}

/// Region bit masks of the mechanisms incident to the region (bit j = region[j]).
/// Mechanisms that never fire are left out.
struct RegionMechanisms {
    std::vector<uint32_t> mechanisms;
    std::vector<uint64_t> masks;
    std::vector<double> probabilities;
};

inline RegionMechanisms region_mechanisms(const DetectorModel &model, std::span<const uint32_t> region) {
    if (region.size() > 64) {
        throw std::length_error("region of " + std::to_string(region.size()) + " detectors exceeds 64 bits");
    }
    RegionMechanisms out;
    for (auto k : model.incident_mechanisms(region)) {
        const auto &m = model.mechanisms[k];
        if (m.probability == 0) {
            continue;
        }
        uint64_t mask = 0;
        for (size_t j = 0; j < region.size(); j++) {
            if (std::binary_search(m.detectors.begin(), m.detectors.end(), region[j])) {
                mask |= uint64_t{1} << j;
            }
        }
        out.mechanisms.push_back(k);
        out.masks.push_back(mask);
        out.probabilities.push_back(m.probability);
    }
    return out;
}

inline constexpr size_t kBruteForceMechanismCap = 22;
inline constexpr size_t kExactWidthCap = 26;

inline double entropy_bits(std::span<const double> probs) {
    double h = 0;
    for (auto p : probs) {
        if (p > 0) {
            h -= p * std::log2(p);
        }
    }
    return std::max(0.0, h);
}

/// Exact entropy by enumerating every pattern of the region-incident mechanisms.
inline double exact_entropy(const DetectorModel &model, std::span<const uint32_t> region,
                            size_t cap = kBruteForceMechanismCap) {
    auto rm = region_mechanisms(model, region);
    size_t m = rm.mechanisms.size();
    if (m > cap) {
        throw std::length_error("exact_entropy: " + std::to_string(m) +
                                " region-incident mechanisms exceed the brute-force cap of " + std::to_string(cap));
    }
    std::unordered_map<uint64_t, double> dist;
    // Depth-first over mechanisms, carrying (pattern, probability).
    auto rec = [&](auto &&self, size_t k, uint64_t pattern, double prob) -> void {
        if (prob == 0) {
            return;
        }
        if (k == m) {
            dist[pattern] += prob;
            return;
        }
        double p = rm.probabilities[k];
        self(self, k + 1, pattern, prob * (1 - p));
        self(self, k + 1, pattern ^ rm.masks[k], prob * p);
    };
    rec(rec, 0, 0, 1.0);
    std::vector<double> probs;
    probs.reserve(dist.size());
    for (const auto &[k, p] : dist) {
        probs.push_back(p);
    }
    std::sort(probs.begin(), probs.end());
    return entropy_bits(probs);
}

/// Dense distribution over width-bit patterns.
struct ExactDistribution {
    size_t width = 0;
    std::vector<double> prob;

    /// Distribution of the selected bits (bit j of the result = bit bits[j]).
    ExactDistribution project(std::span<const size_t> bits) const {
        ExactDistribution out;
        out.width = bits.size();
        out.prob.assign(size_t{1} << bits.size(), 0);
        for (size_t x = 0; x < prob.size(); x++) {
            if (prob[x] == 0) {
                continue;
            }
            size_t y = 0;
            for (size_t j = 0; j < bits.size(); j++) {
                y |= ((x >> bits[j]) & 1) << j;
            }
            out.prob[y] += prob[x];
        }
        return out;
    }
    double entropy() const {
        return entropy_bits(prob);
    }
};

/// Exact distribution of XOR-combined independent bit masks, by folding in one
/// mask at a time: P'(x) = (1 - p) P(x) + p P(x ^ mask).
inline ExactDistribution convolve_masks(size_t width, std::span<const uint64_t> masks, std::span<const double> probs,
                                        size_t width_cap = kExactWidthCap) {
    if (width > width_cap) {
        throw std::length_error("exact distribution over " + std::to_string(width) + " bits exceeds the cap of " +
                                std::to_string(width_cap) + " bits");
    }
    ExactDistribution d;
    d.width = width;
    d.prob.assign(size_t{1} << width, 0);
    d.prob[0] = 1;
    std::vector<double> next(d.prob.size());
    for (size_t k = 0; k < masks.size(); k++) {
        double p = probs[k];
        uint64_t mask = masks[k];
        if (p == 0 || mask == 0) {
            continue;
        }
        for (size_t x = 0; x < d.prob.size(); x++) {
            next[x] = (1 - p) * d.prob[x] + p * d.prob[x ^ mask];
        }
        d.prob.swap(next);
    }
    return d;
}

/// Exact joint distribution of a region's detector bits.
inline ExactDistribution exact_marginal(const DetectorModel &model, std::span<const uint32_t> region,
                                        size_t width_cap = kExactWidthCap) {
    auto rm = region_mechanisms(model, region);
    return convolve_masks(region.size(), rm.masks, rm.probabilities, width_cap);
}

/// Entropy at p = 1/2: the image of the region rows of M is uniformly
/// distributed, so H equals their GF(2) rank.
inline double rank_entropy_half(const DetectorModel &model, std::span<const uint32_t> region) {
    for (size_t k = 0; k < model.mechanisms.size(); k++) {
        if (model.mechanisms[k].probability != 0.5) {
            throw std::invalid_argument("rank_entropy_half: mechanism " + std::to_string(k) + " has p=" +
                                        format_double(model.mechanisms[k].probability) + ", need all p = 1/2");
        }
    }
    std::vector<BitRow> rows;
    for (auto d : region) {
        BitRow r(model.num_mechanisms());
        for (auto k : model.detector_mechanisms.at(d)) {
            r.set(k, true);
        }
        rows.push_back(std::move(r));
    }
    return static_cast<double>(gf2_rank(rows));
}

/// Exact probability of individual region patterns. Region bits are eliminated
/// one at a time (spatial column by column, rounds within a column); the state
/// is the pending parity of a sliding window of not-yet-eliminated bits, so the
/// cost per pattern is linear in the region size and exponential only in the
/// window, i.e. in the strip height for the usual nested regions.
class RegionLikelihood {
   public:
    static constexpr size_t kMaxWindow = 22;

    RegionLikelihood(const DetectorModel &model, std::span<const uint32_t> region) : width_(region.size()) {
        auto rm = region_mechanisms(model, region);
        order_.resize(width_);
        std::iota(order_.begin(), order_.end(), size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](size_t a, size_t b) {
            const auto &da = model.detectors[region[a]];
            const auto &db = model.detectors[region[b]];
            return std::tie(da.position[0], da.position[1], da.round, da.check) <
                   std::tie(db.position[0], db.position[1], db.round, db.check);
        });
        std::vector<size_t> step_of(width_);
        for (size_t s = 0; s < width_; s++) {
            step_of[order_[s]] = s;
        }
        // Re-express masks in elimination order and merge parallel mechanisms.
        std::map<uint64_t, double> merged;
        for (size_t k = 0; k < rm.masks.size(); k++) {
            uint64_t m = 0;
            for (size_t j = 0; j < width_; j++) {
                if ((rm.masks[k] >> j) & 1) {
                    m |= uint64_t{1} << step_of[j];
                }
            }
            double &p = merged[m];
            p = p * (1 - rm.probabilities[k]) + rm.probabilities[k] * (1 - p);
        }
        window_ = 1;
        by_step_.resize(width_);
        for (auto [m, p] : merged) {
            size_t lo = static_cast<size_t>(std::countr_zero(m));
            size_t hi = 63 - static_cast<size_t>(std::countl_zero(m));
            window_ = std::max(window_, hi - lo + 1);
            by_step_[lo].push_back({m >> lo, p});
        }
        if (window_ > kMaxWindow) {
            throw std::length_error("RegionLikelihood: elimination window of " + std::to_string(window_) +
                                    " bits exceeds " + std::to_string(kMaxWindow));
        }
    }

    size_t width() const {
        return width_;
    }
    size_t window() const {
        return window_;
    }

    /// log2 P(pattern); bit j of the pattern is region[j].
    double log2_prob(uint64_t pattern) const {
        size_t size = size_t{1} << window_;
        thread_local std::vector<double> v;
        v.assign(size, 0.0);
        v[0] = 1;
        double log_scale = 0;
        for (size_t s = 0; s < width_; s++) {
            for (const auto &[m, p] : by_step_[s]) {
                uint64_t low = m & (~m + 1);
                for (size_t t = 0; t < size; t++) {
                    if (t & low) {
                        continue;
                    }
                    double a = v[t], b = v[t ^ m];
                    v[t] = (1 - p) * a + p * b;
                    v[t ^ m] = (1 - p) * b + p * a;
                }
            }
            size_t bit = (pattern >> order_[s]) & 1;
            double total = 0;
            for (size_t t = 0; t < size / 2; t++) {
                v[t] = v[(t << 1) | bit];
                total += v[t];
            }
            std::fill(v.begin() + static_cast<std::ptrdiff_t>(size / 2), v.end(), 0.0);
            if (total <= 0) {
                return -std::numeric_limits<double>::infinity();
            }
            for (size_t t = 0; t < size / 2; t++) {
                v[t] /= total;
            }
            log_scale += std::log2(total);
        }
        return log_scale + std::log2(v[0]);
    }

   private:
    size_t width_ = 0;
    size_t window_ = 1;
    std::vector<size_t> order_;
    std::vector<std::vector<std::pair<uint64_t, double>>> by_step_;
};

/// Per-sample -log2 P(key) for keys of a region, evaluating each distinct key once.
inline std::vector<double> surprisal(const RegionLikelihood &lik, std::span<const uint64_t> keys) {
    std::vector<uint64_t> distinct(keys.begin(), keys.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> value(distinct.size());
    for (size_t i = 0; i < distinct.size(); i++) {
        value[i] = -lik.log2_prob(distinct[i]);
    }
    std::vector<double> out(keys.size());
    for (size_t i = 0; i < keys.size(); i++) {
        auto it = std::lower_bound(distinct.begin(), distinct.end(), keys[i]);
        out[i] = value[static_cast<size_t>(it - distinct.begin())];
    }
    return out;
}

/// Mean of per-sample values with its delete-one-group jackknife error.
struct GroupedMean {
    double mean = 0;
    double std_error = 0;
};

inline GroupedMean grouped_mean(std::span<const double> values, size_t groups = 32) {
    size_t n = values.size();
    if (n == 0) {
        throw std::invalid_argument("grouped_mean: no samples");
    }
    groups = std::max<size_t>(1, std::min(groups, n));
    auto bounds = jackknife_bounds(n, groups);
    std::vector<double> sums(groups, 0);
    double total = 0;
    for (size_t g = 0; g < groups; g++) {
        for (size_t i = bounds[g]; i < bounds[g + 1]; i++) {
            sums[g] += values[i];
        }
        total += sums[g];
    }
    GroupedMean out;
    out.mean = total / static_cast<double>(n);
    if (groups > 1) {
        std::vector<double> reps;
        for (size_t g = 0; g < groups; g++) {
            reps.push_back((total - sums[g]) / static_cast<double>(n - (bounds[g + 1] - bounds[g])));
        }
        out.std_error = jackknife_stderr(reps);
    }
    return out;
}

/// How the raw readouts are referenced. `perfect` follows the circuit exactly
/// (outcomes relative to a fixed code state). `random` adds an independent
/// uniform bit per check to all of its readouts, as for readouts whose overall
/// sign is not fixed; only XORs of readouts of the same check stay meaningful.
enum class SyndromeFrame { perfect, random };

struct DecompositionReport {
    double h_s = 0;
    double h_d = 0;
    size_t s_bits = 0;
    size_t d_bits = 0;
    double residual = 0;
};

/// Checks H(s) = H(d) + |s| - |d| on a region of raw readout bits
/// (indices slot * num_checks + check). d are the combinations of region
/// readouts that do not depend on the random frame.
inline DecompositionReport entropy_decomposition_check(const CssCode &code, size_t rounds, const NoiseModel &noise,
                                                       std::span<const uint32_t> raw_region,
                                                       SyndromeFrame frame = SyndromeFrame::random,
                                                       size_t width_cap = kExactWidthCap) {
    auto model = build_detector_model(code, rounds, noise);
    size_t num_checks = code.num_checks();
    size_t total = num_checks * (rounds + 1);
    size_t w = raw_region.size();
    if (w > width_cap || w > 64) {
        throw std::length_error("entropy_decomposition_check: region of " + std::to_string(w) +
                                " readouts exceeds the cap of " + std::to_string(std::min<size_t>(width_cap, 64)));
    }
    for (auto s : raw_region) {
        if (s >= total) {
            throw std::out_of_range("entropy_decomposition_check: readout " + std::to_string(s) + " out of range");
        }
    }
    auto to_mask = [&](const BitRow &bits) {
        uint64_t mask = 0;
        for (size_t j = 0; j < w; j++) {
            if (bits.get(raw_region[j])) {
                mask |= uint64_t{1} << j;
            }
        }
        return mask;
    };
    std::vector<uint64_t> masks;
    std::vector<double> probs;
    for (size_t k = 0; k < model.num_mechanisms(); k++) {
        BitRow e(model.num_mechanisms());
        e.set(k, true);
        masks.push_back(to_mask(simulate_syndromes(model, e).bits));
        probs.push_back(model.mechanisms[k].probability);
    }
    std::vector<BitRow> gauge;
    if (frame == SyndromeFrame::random) {
        for (size_t c = 0; c < num_checks; c++) {
            BitRow g(w);
            for (size_t j = 0; j < w; j++) {
                g.set(j, raw_region[j] % num_checks == c);
            }
            if (!g.none()) {
                gauge.push_back(g);
            }
        }
    }
    auto all_masks = masks;
    auto all_probs = probs;
    for (const auto &g : gauge) {
        uint64_t mask = 0;
        for (auto j : g.support()) {
            mask |= uint64_t{1} << j;
        }
        all_masks.push_back(mask);
        all_probs.push_back(0.5);
    }
    DecompositionReport rep;
    rep.s_bits = w;
    rep.h_s = convolve_masks(w, all_masks, all_probs, width_cap).entropy();

    auto basis = gf2_nullspace(gauge, w);
    rep.d_bits = basis.size();
    std::vector<uint64_t> d_masks;
    for (auto mask : masks) {
        uint64_t out = 0;
        for (size_t r = 0; r < basis.size(); r++) {
            bool bit = false;
            for (auto j : basis[r].support()) {
                bit ^= (mask >> j) & 1;
            }
            out |= uint64_t{bit} << r;
        }
        d_masks.push_back(out);
    }
    rep.h_d = convolve_masks(rep.d_bits, d_masks, probs, width_cap).entropy();
    rep.residual = rep.h_s - (rep.h_d + static_cast<double>(rep.s_bits) - static_cast<double>(rep.d_bits));
    return rep;
}

}  // namespace stm

#endif
