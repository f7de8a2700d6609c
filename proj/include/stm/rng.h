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

#ifndef _STM_RNG_H
#define _STM_RNG_H

#include <bit>
#include <cstdint>
#include <random>
#include <string_view>

#include "stm/util.h"

namespace stm {

/// Generator for one (root seed, named stream, counter) triple.
///
/// Every consumer of randomness derives its generator from the root seed, a
/// stream name ("sampling", "tableau", "decoder", ...) and a counter such as a
/// chunk index, so results do not depend on which worker runs which chunk.
inline std::mt19937_64 stream_rng(uint64_t seed, std::string_view stream, uint64_t counter = 0) {
    uint64_t id = fnv1a(stream);
    std::seed_seq seq{
        static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
        static_cast<uint32_t>(id),   static_cast<uint32_t>(id >> 32),
        static_cast<uint32_t>(counter), static_cast<uint32_t>(counter >> 32),
    };
    return std::mt19937_64(seq);
}

/// 64 independent Bernoulli(p) bits. p is resolved to 32 binary digits: the
/// word is built from the least significant digit upwards, OR-ing a fresh
/// uniform word for a 1 digit and AND-ing for a 0 digit.
inline uint64_t bernoulli_word(std::mt19937_64 &rng, double p) {
    if (p <= 0) {
        return 0;
    }
    if (p >= 1) {
        return ~uint64_t{0};
    }
    auto fixed = static_cast<uint64_t>(p * 4294967296.0 + 0.5);
    if (fixed >= (uint64_t{1} << 32)) {
        return ~uint64_t{0};
    }
    if (fixed == 0) {
        return 0;
    }
    int low = std::countr_zero(fixed);
    uint64_t acc = 0;
    for (int k = low; k < 32; k++) {
        uint64_t r = rng();
        acc = ((fixed >> k) & 1) ? (acc | r) : (acc & r);
    }
    return acc;
}

}  // namespace stm

#endif
