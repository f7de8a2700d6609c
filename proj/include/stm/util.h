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

#ifndef _STM_UTIL_H
#define _STM_UTIL_H

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace stm {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// 64-bit FNV-1a. Used for content hashes embedded in output files.
inline uint64_t fnv1a(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Shortest decimal text that round-trips the double.
inline std::string format_double(double v) {
    char buf[32];
    for (int precision = 6; precision <= 17; precision++) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

/// Runs body(k) for k in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots; the call order is unspecified.
inline void parallel_for(size_t n, size_t jobs, const std::function<void(size_t)> &body) {
    jobs = std::max<size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (size_t k = 0; k < n; k++) {
            body(k);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    {
        std::vector<std::jthread> workers;
        for (size_t w = 0; w < jobs; w++) {
            workers.emplace_back([&] {
                try {
                    for (size_t k = next++; k < n; k = next++) {
                        body(k);
                    }
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = n;
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace stm

#endif
