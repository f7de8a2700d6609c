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

#ifndef _STM_SAMPLER_H
#define _STM_SAMPLER_H

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stm/rng.h"
#include "stm/spacetime.h"
#include "stm/util.h"

namespace stm {

/// Samples of a set of detector columns, bit-packed 64 samples per word.
/// Column k holds detector region[k]; its words are contiguous.
struct SampleBatch {
    size_t n_samples = 0;
    std::vector<uint32_t> region;
    std::vector<uint64_t> data;
    uint64_t seed = 0;
    std::string stream;
    uint64_t model_hash = 0;

    size_t words_per_column() const {
        return words_for_bits(n_samples);
    }
    size_t width() const {
        return region.size();
    }
    std::span<uint64_t> column(size_t k) {
        return {data.data() + k * words_per_column(), words_per_column()};
    }
    std::span<const uint64_t> column(size_t k) const {
        return {data.data() + k * words_per_column(), words_per_column()};
    }
    bool get(size_t sample, size_t k) const {
        return (column(k)[sample >> 6] >> (sample & 63)) & 1;
    }
    void set(size_t sample, size_t k, bool v) {
        uint64_t mask = uint64_t{1} << (sample & 63);
        auto &w = column(k)[sample >> 6];
        w = v ? (w | mask) : (w & ~mask);
    }
    /// Column position of a detector, or width() if absent.
    size_t position_of(uint32_t detector) const {
        auto it = std::find(region.begin(), region.end(), detector);
        return static_cast<size_t>(it - region.begin());
    }
    bool operator==(const SampleBatch &) const = default;
};

/// Samples per RNG chunk. Fixed so that output does not depend on --jobs.
inline constexpr size_t kSampleChunk = 4096;

/// Draws n samples of the region's detector bits. Only mechanisms incident to
/// the region are drawn; each chunk of kSampleChunk samples has its own stream.
inline SampleBatch sample_batch(const DetectorModel &model, std::span<const uint32_t> region, size_t n, uint64_t seed,
                                std::string_view stream = "sampling", size_t jobs = 1) {
    if (region.empty()) {
        throw std::invalid_argument("sample_batch: empty region");
    }
    if (n < 1) {
        throw std::invalid_argument("sample_batch: need at least one sample");
    }
    for (auto d : region) {
        if (d >= model.num_detectors()) {
            throw std::out_of_range("sample_batch: detector " + std::to_string(d) + " out of range");
        }
    }
    SampleBatch batch;
    batch.n_samples = n;
    batch.region.assign(region.begin(), region.end());
    batch.seed = seed;
    batch.stream = stream;
    batch.model_hash = model.hash();
    size_t wpc = batch.words_per_column();
    batch.data.assign(wpc * region.size(), 0);

    std::vector<std::vector<uint32_t>> hits;  // per incident mechanism: region columns it flips
    std::vector<double> probs;
    auto incident = model.incident_mechanisms(region);
    for (auto k : incident) {
        const auto &m = model.mechanisms[k];
        std::vector<uint32_t> cols;
        for (size_t c = 0; c < region.size(); c++) {
            if (std::binary_search(m.detectors.begin(), m.detectors.end(), region[c])) {
                cols.push_back(static_cast<uint32_t>(c));
            }
        }
        if (m.probability > 0) {
            hits.push_back(std::move(cols));
            probs.push_back(m.probability);
        }
    }

    constexpr size_t chunk_words = kSampleChunk / 64;
    size_t num_chunks = (n + kSampleChunk - 1) / kSampleChunk;
    parallel_for(num_chunks, jobs, [&](size_t chunk) {
        auto rng = stream_rng(seed, stream, chunk);
        size_t w0 = chunk * chunk_words;
        size_t w1 = std::min(wpc, w0 + chunk_words);
        for (size_t k = 0; k < hits.size(); k++) {
            for (size_t w = w0; w < w1; w++) {
                uint64_t word = bernoulli_word(rng, probs[k]);
                for (auto c : hits[k]) {
                    batch.data[c * wpc + w] ^= word;
                }
            }
        }
    });
    if (n % 64) {
        uint64_t keep = (uint64_t{1} << (n % 64)) - 1;
        for (size_t c = 0; c < region.size(); c++) {
            batch.data[c * wpc + wpc - 1] &= keep;
        }
    }
    return batch;
}

/// Per-sample pattern keys; bit j of a key is column cols[j].
inline std::vector<uint64_t> pattern_keys(const SampleBatch &batch, std::span<const size_t> cols) {
    if (cols.size() > 64) {
        throw std::invalid_argument("pattern_keys: more than 64 columns");
    }
    std::vector<uint64_t> keys(batch.n_samples, 0);
    size_t wpc = batch.words_per_column();
    for (size_t j = 0; j < cols.size(); j++) {
        if (cols[j] >= batch.width()) {
            throw std::out_of_range("pattern_keys: column " + std::to_string(cols[j]) + " out of range");
        }
        auto col = batch.column(cols[j]);
        for (size_t w = 0; w < wpc; w++) {
            uint64_t v = col[w];
            while (v) {
                size_t b = std::countr_zero(v);
                v &= v - 1;
                keys[w * 64 + b] |= uint64_t{1} << j;
            }
        }
    }
    return keys;
}

/// Sparse histogram: (pattern, count) sorted by pattern.
struct Histogram {
    size_t width = 0;
    uint64_t total = 0;
    std::vector<std::pair<uint64_t, uint64_t>> entries;

    uint64_t count(uint64_t pattern) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), std::pair<uint64_t, uint64_t>{pattern, 0});
        return (it != entries.end() && it->first == pattern) ? it->second : 0;
    }
};

inline constexpr size_t kDefaultPatternCap = 24;

inline void check_pattern_cap(size_t width, size_t cap) {
    if (width > cap) {
        throw std::length_error("pattern width " + std::to_string(width) + " bits exceeds the histogram cap of " +
                                std::to_string(cap) + " bits");
    }
}

inline Histogram histogram_of(std::vector<uint64_t> keys, size_t width) {
    std::sort(keys.begin(), keys.end());
    Histogram h;
    h.width = width;
    h.total = keys.size();
    for (size_t i = 0; i < keys.size();) {
        size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) {
            j++;
        }
        h.entries.push_back({keys[i], j - i});
        i = j;
    }
    return h;
}

/// Exact pattern counts over a subset of the batch's columns.
inline Histogram marginalize(const SampleBatch &batch, std::span<const size_t> cols, size_t cap = kDefaultPatternCap) {
    check_pattern_cap(cols.size(), cap);
    return histogram_of(pattern_keys(batch, cols), cols.size());
}

inline nlohmann::json batch_sidecar(const SampleBatch &batch) {
    return {
        {"format", "stm-batch"},
        {"version", 1},
        {"tool_version", std::string(kToolVersion)},
        {"n_samples", batch.n_samples},
        {"region", batch.region},
        {"seed", batch.seed},
        {"stream", batch.stream},
        {"model_hash", hex64(batch.model_hash)},
        {"layout", "column-major little-endian uint64 words"},
    };
}

/// Writes `path` (raw words) and `path.json` (provenance).
inline void save_batch(const SampleBatch &batch, const std::string &path) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) {
        throw std::runtime_error("save_batch: cannot open " + path);
    }
    for (uint64_t w : batch.data) {
        unsigned char bytes[8];
        for (int b = 0; b < 8; b++) {
            bytes[b] = static_cast<unsigned char>(w >> (8 * b));
        }
        bin.write(reinterpret_cast<const char *>(bytes), 8);
    }
    std::ofstream side(path + ".json");
    side << batch_sidecar(batch).dump(2) << "\n";
}

inline SampleBatch load_batch(const std::string &path) {
    std::ifstream side(path + ".json");
    if (!side) {
        throw std::runtime_error("load_batch: missing sidecar " + path + ".json");
    }
    auto j = nlohmann::json::parse(side);
    SampleBatch batch;
    batch.n_samples = j.at("n_samples").get<size_t>();
    batch.region = j.at("region").get<std::vector<uint32_t>>();
    batch.seed = j.at("seed").get<uint64_t>();
    batch.stream = j.at("stream").get<std::string>();
    batch.model_hash = std::stoull(j.at("model_hash").get<std::string>(), nullptr, 16);
    size_t expected = batch.words_per_column() * batch.region.size();
    std::ifstream bin(path, std::ios::binary);
    if (!bin) {
        throw std::runtime_error("load_batch: cannot open " + path);
    }
    batch.data.resize(expected);
    for (size_t i = 0; i < expected; i++) {
        unsigned char bytes[8];
        if (!bin.read(reinterpret_cast<char *>(bytes), 8)) {
            throw std::runtime_error("load_batch: " + path + " is truncated at word " + std::to_string(i));
        }
        uint64_t w = 0;
        for (int b = 0; b < 8; b++) {
            w |= uint64_t{bytes[b]} << (8 * b);
        }
        batch.data[i] = w;
    }
    return batch;
}

// Detector-sample interchange: one JSON header line
//   {"version":1,"coordinates":"check_round","detectors":[{"check":c,"round":t},...],
//    "n_rows":n,"encoding":"hex"|"binary"}
// followed by n rows of ceil(w / 8) bytes; bit b of byte k is detector 8k + b.
// Hex rows are newline-terminated lowercase text, binary rows are raw bytes.

inline const std::vector<std::string> &supported_coordinate_schemes() {
    static const std::vector<std::string> schemes{"check_round"};
    return schemes;
}

struct DetectorRecords {
    std::vector<std::pair<uint32_t, uint32_t>> coordinates;  // (check, round)
    SampleBatch batch;                                       // columns follow `coordinates`
};

inline void write_detector_records(std::ostream &out, const DetectorModel &model, const SampleBatch &batch,
                                   const std::string &encoding = "hex") {
    if (encoding != "hex" && encoding != "binary") {
        throw std::invalid_argument("unknown encoding '" + encoding + "' (supported: hex, binary)");
    }
    nlohmann::json header;
    header["version"] = 1;
    header["coordinates"] = "check_round";
    auto dets = nlohmann::json::array();
    for (auto d : batch.region) {
        dets.push_back({{"check", model.detectors.at(d).check}, {"round", model.detectors.at(d).round}});
    }
    header["detectors"] = dets;
    header["n_rows"] = batch.n_samples;
    header["encoding"] = encoding;
    out << header.dump() << "\n";
    size_t w = batch.width();
    size_t row_bytes = (w + 7) / 8;
    std::vector<unsigned char> row(row_bytes);
    static const char *digits = "0123456789abcdef";
    for (size_t s = 0; s < batch.n_samples; s++) {
        std::fill(row.begin(), row.end(), 0);
        for (size_t k = 0; k < w; k++) {
            if (batch.get(s, k)) {
                row[k / 8] |= static_cast<unsigned char>(1u << (k % 8));
            }
        }
        if (encoding == "hex") {
            std::string line;
            for (auto byte : row) {
                line.push_back(digits[byte >> 4]);
                line.push_back(digits[byte & 15]);
            }
            out << line << "\n";
        } else {
            out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size()));
        }
    }
}

/// Parses an interchange stream. Errors name the offending row (1-based,
/// counting data rows after the header).
inline DetectorRecords read_detector_records(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("detector records: missing header line");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
        throw std::runtime_error(std::string("detector records: header is not valid JSON: ") + e.what());
    }
    auto scheme = header.value("coordinates", std::string("check_round"));
    const auto &schemes = supported_coordinate_schemes();
    if (std::find(schemes.begin(), schemes.end(), scheme) == schemes.end()) {
        std::string list;
        for (const auto &s : schemes) {
            list += (list.empty() ? "" : ", ") + s;
        }
        throw std::runtime_error("detector records: unknown coordinate scheme '" + scheme + "' (supported: " + list +
                                 ")");
    }
    if (!header.contains("detectors") || !header.contains("n_rows")) {
        throw std::runtime_error("detector records: header needs 'detectors' and 'n_rows'");
    }
    DetectorRecords rec;
    for (const auto &d : header["detectors"]) {
        rec.coordinates.push_back({d.at("check").get<uint32_t>(), d.at("round").get<uint32_t>()});
    }
    size_t n = header["n_rows"].get<size_t>();
    auto encoding = header.value("encoding", std::string("hex"));
    if (encoding != "hex" && encoding != "binary") {
        throw std::runtime_error("detector records: unknown encoding '" + encoding + "' (supported: hex, binary)");
    }
    size_t w = rec.coordinates.size();
    if (w == 0 || n == 0) {
        throw std::runtime_error("detector records: header declares no detectors or no rows");
    }
    size_t row_bytes = (w + 7) / 8;
    auto &batch = rec.batch;
    batch.n_samples = n;
    batch.stream = "ingest";
    for (size_t k = 0; k < w; k++) {
        batch.region.push_back(static_cast<uint32_t>(k));
    }
    batch.data.assign(batch.words_per_column() * w, 0);
    std::vector<unsigned char> row(row_bytes);
    auto hexval = [](char c) -> int {
        if (c >= '0' && c <= '9') {
            return c - '0';
        }
        if (c >= 'a' && c <= 'f') {
            return c - 'a' + 10;
        }
        if (c >= 'A' && c <= 'F') {
            return c - 'A' + 10;
        }
        return -1;
    };
    for (size_t s = 0; s < n; s++) {
        std::string where = "detector records: row " + std::to_string(s + 1);
        if (encoding == "hex") {
            if (!std::getline(in, line)) {
                throw std::runtime_error(where + " is missing (header declares " + std::to_string(n) + " rows)");
            }
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.size() != 2 * row_bytes) {
                throw std::runtime_error(where + " has " + std::to_string(line.size()) + " hex digits, expected " +
                                         std::to_string(2 * row_bytes) + " (truncated or malformed row)");
            }
            for (size_t k = 0; k < row_bytes; k++) {
                int hi = hexval(line[2 * k]), lo = hexval(line[2 * k + 1]);
                if (hi < 0 || lo < 0) {
                    throw std::runtime_error(where + " contains a non-hex character");
                }
                row[k] = static_cast<unsigned char>(hi * 16 + lo);
            }
        } else {
            if (!in.read(reinterpret_cast<char *>(row.data()), static_cast<std::streamsize>(row_bytes))) {
                throw std::runtime_error(where + " is truncated (expected " + std::to_string(row_bytes) + " bytes)");
            }
        }
        for (size_t k = 0; k < w; k++) {
            if ((row[k / 8] >> (k % 8)) & 1) {
                batch.set(s, k, true);
            }
        }
    }
    return rec;
}

}  // namespace stm

#endif
