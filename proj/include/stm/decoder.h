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

#ifndef _STM_DECODER_H
#define _STM_DECODER_H

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "stm/gf2.h"
#include "stm/rng.h"
#include "stm/spacetime.h"
#include "stm/util.h"

namespace stm {

struct DecodeResult {
    /// Mechanism indices, ascending.
    std::vector<uint32_t> correction;
    /// Logical bits flipped by the correction.
    BitRow logical_flips;
};

/// Union-find decoder on the detector graph: detectors are nodes, mechanisms
/// touching one or two detectors are edges, and mechanisms touching a single
/// detector end on a shared boundary node.
///
/// Clusters grow by half edges from every odd cluster in lock step; a cluster
/// is neutral once it holds an even number of defects or touches the boundary.
/// Each neutral cluster is then peeled along a breadth-first spanning forest
/// rooted at the boundary (if reached) or the lowest detector index.
class UnionFindDecoder {
   public:
    explicit UnionFindDecoder(const DetectorModel &model) : model_(&model) {
        num_nodes_ = model.num_detectors() + 1;
        boundary_ = static_cast<uint32_t>(model.num_detectors());
        adj_.resize(num_nodes_);
        for (size_t k = 0; k < model.num_mechanisms(); k++) {
            const auto &m = model.mechanisms[k];
            if (m.probability <= 0 || m.detectors.empty()) {
                continue;
            }
            if (m.detectors.size() > 2) {
                throw std::invalid_argument("UnionFindDecoder: mechanism " + std::to_string(k) + " flips " +
                                            std::to_string(m.detectors.size()) + " detectors (need at most 2)");
            }
            uint32_t a = m.detectors[0];
            uint32_t b = m.detectors.size() == 2 ? m.detectors[1] : boundary_;
            uint32_t e = static_cast<uint32_t>(edges_.size());
            edges_.push_back({a, b, static_cast<uint32_t>(k)});
            adj_[a].push_back(e);
            adj_[b].push_back(e);
        }
        for (auto &list : adj_) {
            std::sort(list.begin(), list.end());
        }
        parent_.resize(num_nodes_);
        size_.resize(num_nodes_);
        parity_.resize(num_nodes_);
        has_boundary_.resize(num_nodes_);
        defect_.resize(num_nodes_);
        border_.resize(num_nodes_);
        min_node_.resize(num_nodes_);
        support_.assign(edges_.size(), 0);
        visited_.assign(num_nodes_, 0);
        in_touched_.assign(num_nodes_, 0);
        queued_.assign(num_nodes_, 0);
        for (uint32_t v = 0; v < num_nodes_; v++) {
            reset_node(v);
        }
    }

    DecodeResult decode(const BitRow &detectors) {
        const auto &model = *model_;
        if (detectors.size() != model.num_detectors()) {
            throw std::invalid_argument("decode: pattern has " + std::to_string(detectors.size()) +
                                        " bits, model has " + std::to_string(model.num_detectors()) + " detectors");
        }
        reset();
        auto fired = detectors.support();
        for (auto d : fired) {
            touch(d);
            defect_[d] = 1;
            parity_[d] = 1;
        }

        // Growth. A cluster can only be odd after a round if it contains a
        // cluster that was odd before it, so candidates come from the last
        // round's odd roots.
        std::vector<uint32_t> odd, candidates(fired.begin(), fired.end());
        std::vector<uint32_t> fusions;
        while (true) {
            odd.clear();
            for (auto d : candidates) {
                uint32_t r = find(d);
                if (parity_[r] && !has_boundary_[r] && !queued_[r]) {
                    queued_[r] = 1;
                    odd.push_back(r);
                }
            }
            for (auto r : odd) {
                queued_[r] = 0;
            }
            if (odd.empty()) {
                break;
            }
            candidates = odd;
            std::sort(odd.begin(), odd.end());
            fusions.clear();
            for (auto r : odd) {
                // Only border nodes (some edge not fully grown) can grow; nodes
                // that become interior are dropped from the border.
                auto &border = border_[r];
                size_t kept = 0;
                for (size_t i = 0; i < border.size(); i++) {
                    uint32_t v = border[i];
                    bool open = false;
                    for (auto e : adj_[v]) {
                        if (support_[e] >= 2) {
                            continue;
                        }
                        if (support_[e] == 0) {
                            touched_edges_.push_back(e);
                        }
                        support_[e]++;
                        if (support_[e] == 2) {
                            fusions.push_back(e);
                        } else {
                            open = true;
                        }
                    }
                    if (open) {
                        border[kept++] = v;
                    }
                }
                border.resize(kept);
            }
            bool any_growth = !fusions.empty();
            for (auto e : fusions) {
                unite(edges_[e].a, edges_[e].b);
            }
            if (!any_growth) {
                // Half-grown edges finish next round; guard against an isolated odd cluster.
                bool can_grow = false;
                for (auto r : odd) {
                    can_grow |= !border_[find(r)].empty();
                }
                if (!can_grow) {
                    throw std::runtime_error("decode: detector pattern is outside the image of the model (infeasible)");
                }
            }
        }

        // Peeling over grown edges of each cluster.
        DecodeResult result;
        result.logical_flips = BitRow(model.num_logicals());
        std::vector<uint32_t> order, via;
        std::vector<uint32_t> roots;
        for (auto v : touched_nodes_) {
            if (find(v) == v) {
                roots.push_back(v);
            }
        }
        std::sort(roots.begin(), roots.end());
        for (auto r : roots) {
            uint32_t start = has_boundary_[r] ? boundary_ : min_node_[r];
            order.clear();
            via.clear();
            order.push_back(start);
            via.push_back(UINT32_MAX);
            visited_[start] = 1;
            visited_list_.push_back(start);
            for (size_t head = 0; head < order.size(); head++) {
                uint32_t v = order[head];
                for (auto e : adj_[v]) {
                    if (support_[e] < 2) {
                        continue;
                    }
                    uint32_t u = edges_[e].a == v ? edges_[e].b : edges_[e].a;
                    if (visited_[u]) {
                        continue;
                    }
                    visited_[u] = 1;
                    visited_list_.push_back(u);
                    order.push_back(u);
                    via.push_back(e);
                }
            }
            for (size_t i = order.size(); i-- > 1;) {
                uint32_t v = order[i];
                if (!defect_[v]) {
                    continue;
                }
                uint32_t e = via[i];
                uint32_t u = edges_[e].a == v ? edges_[e].b : edges_[e].a;
                defect_[v] = 0;
                if (u != boundary_) {
                    defect_[u] ^= 1;
                }
                result.correction.push_back(edges_[e].mechanism);
            }
            if (start != boundary_ && defect_[start]) {
                throw std::runtime_error("decode: detector pattern is outside the image of the model (infeasible)");
            }
        }
        std::sort(result.correction.begin(), result.correction.end());
        for (auto k : result.correction) {
            for (auto l : model.mechanisms[k].logicals) {
                result.logical_flips.flip(l);
            }
        }
        return result;
    }

   private:
    struct Edge {
        uint32_t a, b, mechanism;
    };

    void reset_node(uint32_t v) {
        parent_[v] = v;
        size_[v] = 1;
        parity_[v] = 0;
        has_boundary_[v] = v == boundary_;
        defect_[v] = 0;
        in_touched_[v] = 0;
        queued_[v] = 0;
        border_[v].assign(1, v);
        min_node_[v] = v;
    }

    // Restores the state left by the previous shot to all-singletons.
    void reset() {
        for (auto v : touched_nodes_) {
            reset_node(v);
        }
        touched_nodes_.clear();
        for (auto e : touched_edges_) {
            support_[e] = 0;
        }
        touched_edges_.clear();
        for (auto v : visited_list_) {
            visited_[v] = 0;
        }
        visited_list_.clear();
    }

    void touch(uint32_t v) {
        if (!in_touched_[v]) {
            in_touched_[v] = 1;
            touched_nodes_.push_back(v);
        }
    }

    uint32_t find(uint32_t v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }

    void unite(uint32_t a, uint32_t b) {
        touch(a);
        touch(b);
        uint32_t ra = find(a), rb = find(b);
        if (ra == rb) {
            return;
        }
        if (size_[ra] < size_[rb] || (size_[ra] == size_[rb] && ra > rb)) {
            std::swap(ra, rb);
        }
        parent_[rb] = ra;
        size_[ra] += size_[rb];
        parity_[ra] ^= parity_[rb];
        has_boundary_[ra] = has_boundary_[ra] || has_boundary_[rb];
        min_node_[ra] = std::min(min_node_[ra], min_node_[rb]);
        border_[ra].insert(border_[ra].end(), border_[rb].begin(), border_[rb].end());
        border_[rb].clear();
    }

    const DetectorModel *model_;
    uint32_t num_nodes_ = 0;
    uint32_t boundary_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<uint32_t>> adj_;
    std::vector<uint32_t> parent_, size_;
    std::vector<uint8_t> parity_, has_boundary_, defect_;
    std::vector<std::vector<uint32_t>> border_;
    std::vector<uint32_t> min_node_;
    std::vector<uint8_t> support_;
    std::vector<uint8_t> visited_;
    std::vector<uint32_t> visited_list_;
    std::vector<uint32_t> touched_nodes_;
    std::vector<uint32_t> touched_edges_;
    std::vector<uint8_t> in_touched_;
    std::vector<uint8_t> queued_;
};

inline DecodeResult decode(const DetectorModel &model, const BitRow &detectors) {
    UnionFindDecoder dec(model);
    return dec.decode(detectors);
}

struct RateEstimate {
    uint64_t shots = 0;
    uint64_t errors = 0;
    double rate = 0;
    double ci_low = 0;
    double ci_high = 0;
};

/// Wilson score interval at z = 1.96.
inline RateEstimate wilson_interval(uint64_t errors, uint64_t shots, double z = 1.96) {
    RateEstimate r;
    r.shots = shots;
    r.errors = errors;
    if (shots == 0) {
        r.ci_high = 1;
        return r;
    }
    double n = static_cast<double>(shots);
    double ph = static_cast<double>(errors) / n;
    double denom = 1 + z * z / n;
    double centre = (ph + z * z / (2 * n)) / denom;
    double half = z * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom;
    r.rate = ph;
    r.ci_low = std::max(0.0, centre - half);
    r.ci_high = std::min(1.0, centre + half);
    return r;
}

inline constexpr size_t kDecodeChunk = 1024;

/// Fraction of shots whose correction combined with the drawn error flips a
/// protected logical bit.
inline RateEstimate logical_error_rate(const DetectorModel &model, size_t shots, uint64_t seed, size_t jobs = 1) {
    if (shots < 1) {
        throw std::invalid_argument("logical_error_rate: need at least one shot");
    }
    size_t num_chunks = (shots + kDecodeChunk - 1) / kDecodeChunk;
    std::vector<uint64_t> errors(num_chunks, 0);
    size_t workers = std::max<size_t>(1, std::min(jobs, num_chunks));
    std::vector<UnionFindDecoder> decoders;
    for (size_t w = 0; w < workers; w++) {
        decoders.emplace_back(model);
    }
    size_t m = model.num_mechanisms();
    // One decoder per worker; worker w takes chunks w, w + workers, ...
    parallel_for(workers, workers, [&](size_t w) {
        auto &dec = decoders[w];
        std::vector<uint64_t> words(m);
        std::vector<BitRow> dets(64), logicals(64);
        for (size_t chunk = w; chunk < num_chunks; chunk += workers) {
            auto rng = stream_rng(seed, "decoder", chunk);
            size_t c0 = chunk * kDecodeChunk;
            size_t c1 = std::min(shots, c0 + kDecodeChunk);
            for (size_t s0 = c0; s0 < c1; s0 += 64) {
                for (size_t k = 0; k < m; k++) {
                    words[k] = bernoulli_word(rng, model.mechanisms[k].probability);
                }
                size_t count = std::min<size_t>(64, c1 - s0);
                uint64_t live = count == 64 ? ~uint64_t{0} : (uint64_t{1} << count) - 1;
                for (size_t b = 0; b < count; b++) {
                    dets[b] = BitRow(model.num_detectors());
                    logicals[b] = BitRow(model.num_logicals());
                }
                for (size_t k = 0; k < m; k++) {
                    for (uint64_t w = words[k] & live; w; w &= w - 1) {
                        size_t b = static_cast<size_t>(std::countr_zero(w));
                        for (auto d : model.mechanisms[k].detectors) {
                            dets[b].flip(d);
                        }
                        for (auto l : model.mechanisms[k].logicals) {
                            logicals[b].flip(l);
                        }
                    }
                }
                for (size_t b = 0; b < count; b++) {
                    auto res = dec.decode(dets[b]);
                    res.logical_flips ^= logicals[b];
                    errors[chunk] += !res.logical_flips.none();
                }
            }
        }
    });
    uint64_t total = std::accumulate(errors.begin(), errors.end(), uint64_t{0});
    return wilson_interval(total, shots);
}

struct RateCurve {
    size_t L = 0;
    std::vector<double> ps;
    std::vector<double> rates;
};

struct ThresholdEstimate {
    bool ok = false;
    std::string failure;
    double estimate = 0;
    double spread = 0;
    std::vector<double> crossings;
};

/// Pairwise crossings of logical-error-rate curves by linear interpolation of
/// their difference between adjacent grid points.
inline ThresholdEstimate threshold_estimate(const std::vector<RateCurve> &curves) {
    ThresholdEstimate out;
    if (curves.size() < 2) {
        out.failure = "need at least 2 sizes";
        return out;
    }
    for (const auto &c : curves) {
        if (c.ps.size() < 4 || c.ps.size() != c.rates.size()) {
            out.failure = "need at least 4 p-points per size";
            return out;
        }
    }
    std::string diag;
    for (size_t i = 0; i < curves.size(); i++) {
        for (size_t j = i + 1; j < curves.size(); j++) {
            const auto &a = curves[i];
            const auto &b = curves[j];
            if (a.ps != b.ps) {
                out.failure = "curves use different p grids";
                return out;
            }
            // First sign change of the difference; grid points where the two
            // rates tie (e.g. both zero far below threshold) carry no sign.
            bool found = false;
            size_t prev = a.ps.size();
            for (size_t k = 0; k < a.ps.size() && !found; k++) {
                double d = b.rates[k] - a.rates[k];
                if (d == 0) {
                    continue;
                }
                if (prev < a.ps.size()) {
                    double d0 = b.rates[prev] - a.rates[prev];
                    if ((d0 < 0) != (d < 0)) {
                        out.crossings.push_back(a.ps[prev] + (a.ps[k] - a.ps[prev]) * d0 / (d0 - d));
                        found = true;
                    }
                }
                prev = k;
            }
            if (!found) {
                diag += " L=" + std::to_string(a.L) + " vs L=" + std::to_string(b.L);
            }
        }
    }
    if (out.crossings.empty()) {
        out.failure = "no bracketed crossing between any pair of curves:" + diag;
        return out;
    }
    double mean = 0;
    for (auto x : out.crossings) {
        mean += x;
    }
    mean /= static_cast<double>(out.crossings.size());
    double lo = *std::min_element(out.crossings.begin(), out.crossings.end());
    double hi = *std::max_element(out.crossings.begin(), out.crossings.end());
    out.estimate = mean;
    out.spread = (hi - lo) / 2;
    out.ok = true;
    return out;
}

}  // namespace stm

#endif
