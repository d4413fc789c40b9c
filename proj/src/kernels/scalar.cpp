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

#include "semdec/simd.hpp"

namespace semdec::simd::detail {
namespace {

double
dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void
axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

double
squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void
matvec_scalar(const double* w, std::size_t rows, const double* x, std::size_t n, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_scalar(w + r * n, x, n);
    }
}

}  // namespace

const KernelTable kScalarTable{
    Backend::Scalar, "scalar", dot_scalar, axpy_scalar, squared_distance_scalar, matvec_scalar};

}  // namespace semdec::simd::detail
