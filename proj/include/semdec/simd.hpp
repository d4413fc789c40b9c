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

// Double-precision inner-loop kernels. Every kernel has a scalar reference
// implementation and, where the host supports it, an AVX2+FMA (x86-64) or
// NEON (aarch64) variant. The active backend is chosen once at first use:
//   SEMDEC_SIMD=scalar  forces the reference kernels
//   SEMDEC_SIMD=avx2|neon|auto (default) picks the widest supported set
// Vector variants reassociate sums, so results agree with the reference to
// rounding (see tests/unit/test_simd.cpp), not bitwise.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace semdec::simd {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    Backend backend;
    const char* name;
    /// sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// sum_i (a[i] - b[i])^2
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    /// y[r] = dot(w[r, :], x) for r < rows; w is row-major rows x n
    void (*matvec)(const double* w, std::size_t rows, const double* x, std::size_t n, double* y);
};

bool
backend_supported(Backend b) noexcept;

/// Kernel table for a specific backend; throws InputError when the host lacks it.
const KernelTable&
table(Backend b);

/// Currently dispatched kernels.
const KernelTable&
active() noexcept;

/// Overrides the dispatch choice (tests and the CLI's SEMDEC_SIMD handling).
void
set_backend(Backend b);

Backend
parse_backend(std::string_view name);

std::vector<Backend>
supported_backends();

// Convenience wrappers over the active table.

inline double
dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}

inline void
axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double
squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return active().squared_distance(a.data(), b.data(), a.size());
}

/// y = W x with W stored row-major as (y.size() x x.size()).
inline void
matvec(const double* w, std::span<const double> x, std::span<double> y) noexcept {
    active().matvec(w, y.size(), x.data(), x.size(), y.data());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace semdec::simd
