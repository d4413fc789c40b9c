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

#include <atomic>
#include <cstdlib>
#include <string>

#include "semdec/common.hpp"
#include "semdec/simd.hpp"

namespace semdec::simd {
namespace {

bool
cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable*
detect() {
    const char* env = std::getenv("SEMDEC_SIMD");
    if (env != nullptr && *env != '\0' && std::string_view(env) != "auto") {
        const Backend requested = parse_backend(env);
        if (backend_supported(requested)) {
            return &table(requested);
        }
    }
#if defined(__aarch64__)
    return &detail::kNeonTable;
#else
    if (cpu_has_avx2()) {
        return &table(Backend::Avx2);
    }
    return &detail::kScalarTable;
#endif
}

std::atomic<const KernelTable*>&
current() {
    static std::atomic<const KernelTable*> ptr{detect()};
    return ptr;
}

}  // namespace

bool
backend_supported(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
            return cpu_has_avx2();
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable&
table(Backend b) {
    if (!backend_supported(b)) {
        throw InputError("SIMD backend not supported on this host");
    }
    switch (b) {
        case Backend::Scalar:
            return detail::kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::Avx2:
            return detail::kAvx2Table;
#endif
#if defined(__aarch64__)
        case Backend::Neon:
            return detail::kNeonTable;
#endif
        default:
            break;
    }
    throw InputError("SIMD backend not compiled in");
}

const KernelTable&
active() noexcept {
    return *current().load(std::memory_order_relaxed);
}

void
set_backend(Backend b) {
    current().store(&table(b), std::memory_order_relaxed);
}

Backend
parse_backend(std::string_view name) {
    if (name == "scalar") {
        return Backend::Scalar;
    }
    if (name == "avx2") {
        return Backend::Avx2;
    }
    if (name == "neon") {
        return Backend::Neon;
    }
    throw InputError("unknown SIMD backend '" + std::string(name) + "'");
}

std::vector<Backend>
supported_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
        if (backend_supported(b)) {
            out.push_back(b);
        }
    }
    return out;
}

}  // namespace semdec::simd
