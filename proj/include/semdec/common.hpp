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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semdec {

using Token = std::uint32_t;
using ItemIndex = std::uint32_t;
using TokenSeq = std::vector<Token>;

/// Base of every error thrown by the library. The subclass names the failure
/// category; the message carries the offending location or value.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t example_index)
        : Error(what + " (example " + std::to_string(example_index) + ")"),
          example_index_(example_index) {
    }

    std::size_t
    example_index() const noexcept {
        return example_index_;
    }

private:
    std::size_t example_index_;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {
    }

    std::size_t
    line() const noexcept {
        return line_;
    }

private:
    std::size_t line_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix of doubles. Used for parameter blocks, item
/// vectors and codebooks alike.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    }

    std::size_t
    rows() const noexcept {
        return rows_;
    }
    std::size_t
    cols() const noexcept {
        return cols_;
    }
    std::size_t
    size() const noexcept {
        return data_.size();
    }
    bool
    empty() const noexcept {
        return data_.empty();
    }

    double&
    operator()(std::size_t r, std::size_t c) {
        return data_[r * cols_ + c];
    }
    double
    operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    std::span<double>
    row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const double>
    row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>&
    values() noexcept {
        return data_;
    }
    const std::vector<double>&
    values() const noexcept {
        return data_;
    }

    double*
    data() noexcept {
        return data_.data();
    }
    const double*
    data() const noexcept {
        return data_.data();
    }

    void
    fill(double v) {
        std::fill(data_.begin(), data_.end(), v);
    }

    bool
    operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// One ranked recommendation.
struct ScoredItem {
    ItemIndex item = 0;
    double score = 0.0;

    bool
    operator==(const ScoredItem&) const = default;
};

/// Ranked list ordered by (score desc, item asc); the common output of every
/// recommender in the library.
struct ScoredList {
    std::vector<ScoredItem> entries;

    std::size_t
    size() const noexcept {
        return entries.size();
    }
};

/// Sorts by (score desc, item asc) and truncates to k.
void
rank_and_truncate(std::vector<ScoredItem>& items, std::size_t k);

/// Neumaier-compensated sum; order-insensitive to ~1 ulp of the result.
class CompensatedSum {
public:
    void
    add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double
    value() const noexcept {
        return sum_ + comp_;
    }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace semdec
