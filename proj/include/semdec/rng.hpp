// Copyright 2026 The semdec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace semdec {

/// splitmix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t
mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t
hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed for the RNG stream owned by entity `index` of kind `tag`. Streams for
/// different (seed, tag, index) triples are statistically independent, so
/// per-entity work can run in any order or in parallel without changing output.
constexpr std::uint64_t
stream_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept {
    return mix64(mix64(seed ^ hash_tag(tag)) + index);
}

inline std::mt19937_64
make_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return std::mt19937_64(stream_seed(seed, tag, index));
}

}  // namespace semdec
