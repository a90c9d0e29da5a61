// Copyright 2026 The FARO Authors.
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

// Error types, deterministic random streams and compensated summation shared
// by every module.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace faro {

inline constexpr const char* kVersion = "0.3.0";

/// Bad user input: dimensions, ranges, configuration fields.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A fairness constraint references a cell with no data.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the offending 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// The inner descent loop increased the loss too many times in a row.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream identifiers. Every consumer of randomness draws from its own
/// stream so adding draws in one module never shifts another.
enum class StreamId : std::uint64_t {
  kDataset = 1,
  kInit = 2,
  kWorld = 3,
  kGradientProbe = 4,
  kSplit = 5,
  kTest = 99,
};

/// Counter-based generator: the k-th draw is a pure function of
/// (seed, stream, substream, k).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamId stream, std::uint64_t substream = 0)
      : key_(mix64(mix64(seed ^ 0x9e3779b97f4a7c15ULL) +
                   mix64(static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL) +
                   substream * 0x8cb92ba72f3d8dd7ULL)) {}

  std::uint64_t next_u64() {
    return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  /// Box-Muller without caching, so draws never depend on call parity.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double logistic() {
    const double u = uniform_open();
    return std::log(u / (1.0 - u));
  }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Neumaier-compensated accumulator. Sums agree with exact arithmetic to
/// about one ulp independent of summation order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Element-wise compensated accumulation of equally sized vectors.
class CompensatedVector {
 public:
  explicit CompensatedVector(std::size_t n) : parts_(n) {}
  void add_scaled(std::span<const double> v, double scale) {
    for (std::size_t j = 0; j < parts_.size(); ++j) parts_[j].add(scale * v[j]);
  }
  CompensatedSum& operator[](std::size_t j) { return parts_[j]; }
  Vector value(double scale = 1.0) const {
    Vector out(parts_.size());
    for (std::size_t j = 0; j < parts_.size(); ++j) out[j] = parts_[j].value() * scale;
    return out;
  }
  std::size_t size() const { return parts_.size(); }

 private:
  std::vector<CompensatedSum> parts_;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(sigma(z)), branching on the sign so neither side overflows.
inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// 17 significant digits, enough for an exact round trip.
/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace faro
