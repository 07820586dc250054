#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "charlab/rng.hpp"

namespace charlab {

constexpr uint32_t kUnicodeLimit = 1114112;  // 17 planes of 65,536 code points

// K independent universal hash functions over the full codepoint range:
// bucket_k(c) = ((a_k * c + b_k) mod p) mod buckets, with p prime > 1,114,112.
// The same instance backs both the input hash embeddings and the hash
// prediction heads, so the two stay aligned by construction.
class CodepointHasher {
public:
    static constexpr uint64_t kPrime = 2147483647;  // 2^31 - 1

    CodepointHasher() = default;

    CodepointHasher(int num_hashes, int64_t buckets, uint64_t seed)
        : num_hashes_(num_hashes), buckets_(buckets), seed_(seed) {
        if (num_hashes < 1) throw std::invalid_argument("hasher: need at least one hash function");
        if (buckets < 2) throw std::invalid_argument("hasher: need at least two buckets");
        Rng rng(seed);
        coeffs_.resize(static_cast<size_t>(num_hashes));
        for (auto& [a, b] : coeffs_) {
            a = 1 + rng.below(kPrime - 1);
            b = rng.below(kPrime);
        }
    }

    int num_hashes() const { return num_hashes_; }
    int64_t buckets() const { return buckets_; }
    uint64_t seed() const { return seed_; }

    int64_t bucket(uint32_t codepoint, int k) const {
        if (codepoint >= kUnicodeLimit)
            throw std::invalid_argument("hasher: codepoint " + std::to_string(codepoint) + " out of range");
        if (k < 0 || k >= num_hashes_) throw std::invalid_argument("hasher: hash index out of range");
        const auto& [a, b] = coeffs_[static_cast<size_t>(k)];
        return static_cast<int64_t>(((a * codepoint + b) % kPrime) % static_cast<uint64_t>(buckets_));
    }

    // Full bucket signature of a codepoint across all hash functions.
    std::vector<int64_t> signature(uint32_t codepoint) const {
        std::vector<int64_t> sig(static_cast<size_t>(num_hashes_));
        for (int k = 0; k < num_hashes_; ++k) sig[static_cast<size_t>(k)] = bucket(codepoint, k);
        return sig;
    }

    bool operator==(const CodepointHasher& other) const {
        return num_hashes_ == other.num_hashes_ && buckets_ == other.buckets_ && coeffs_ == other.coeffs_;
    }

    // Brute-force scan: over `sample` random codepoints, no pair may share the
    // bucket in every hash. Returns a hasher that passed the scan, advancing
    // the seed until one does.
    static CodepointHasher make_collision_checked(int num_hashes, int64_t buckets, uint64_t seed,
                                                  int sample = 10000) {
        for (uint64_t s = seed;; ++s) {
            CodepointHasher h(num_hashes, buckets, s);
            if (h.collision_free(sample, s ^ 0x5eedULL)) return h;
        }
    }

    bool collision_free(int sample, uint64_t scan_seed) const {
        Rng rng(scan_seed);
        std::unordered_set<uint32_t> points;
        while (points.size() < static_cast<size_t>(sample)) {
            const uint32_t c = static_cast<uint32_t>(rng.below(kUnicodeLimit));
            if (c >= 0xD800 && c <= 0xDFFF) continue;
            points.insert(c);
        }
        std::vector<std::string> sigs;
        sigs.reserve(points.size());
        for (const uint32_t c : points) {
            std::string key;
            for (int k = 0; k < num_hashes_; ++k) {
                const int64_t b = bucket(c, k);
                key.append(reinterpret_cast<const char*>(&b), sizeof(b));
            }
            sigs.push_back(std::move(key));
        }
        std::sort(sigs.begin(), sigs.end());
        return std::adjacent_find(sigs.begin(), sigs.end()) == sigs.end();
    }

private:
    int num_hashes_ = 0;
    int64_t buckets_ = 0;
    uint64_t seed_ = 0;
    std::vector<std::pair<uint64_t, uint64_t>> coeffs_;
};

}  // namespace charlab
