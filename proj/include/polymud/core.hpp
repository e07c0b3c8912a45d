// SPDX-License-Identifier: Apache-2.0
//
// polymud - deterministic moments and polynomial expansion multiuser detection
// Copyright (C) 2026 The polymud authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace polymud
{
using Index = Eigen::Index;
using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// ----- Errors ------------------------------------------------------------

/// Base class of every error thrown by the library.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the operation's domain (bad dimensions, negative distances, non-PSD input, ...).
class domain_error : public error
{
public:
    using error::error;
};

/// Numerical procedure failed to reach its tolerance. Carries the achieved residual.
class numeric_error : public error
{
public:
    numeric_error(const std::string &what, double residual)
        : error(what + " (residual " + format(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    static std::string format(double x)
    {
        std::ostringstream s;
        s << std::setprecision(3) << x;
        return s.str();
    }

    double residual_;
};

/// Iterative solver hit its iteration cap.
class convergence_error : public numeric_error
{
public:
    convergence_error(const std::string &what, double residual, long iterations)
        : numeric_error(what + " after " + std::to_string(iterations) + " iterations", residual),
          iterations_(iterations) {}
    long iterations() const noexcept { return iterations_; }

private:
    long iterations_;
};

/// Linear system too ill-conditioned to solve reliably.
class conditioning_error : public numeric_error
{
public:
    using numeric_error::numeric_error;
};

/// Invalid experiment configuration.
class config_error : public error
{
public:
    using error::error;
};

// ----- Random numbers ----------------------------------------------------

/// SplitMix64 finalizer. Used to derive independent stream seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for stream `stream`, item `index` of a run started from `master`.
/// Distinct (stream, index) pairs give statistically independent engines.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) noexcept
{
    return splitmix64(splitmix64(splitmix64(master) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

using Rng = std::mt19937_64;

// Named stream ids, so every consumer of a master seed draws from its own sequence.
namespace streams
{
inline constexpr std::uint64_t profile = 1;
inline constexpr std::uint64_t channel = 2;
inline constexpr std::uint64_t symbols = 3;
inline constexpr std::uint64_t users = 4;
} // namespace streams

// ----- Small helpers -----------------------------------------------------

inline void symmetrize(CMatrix &x)
{
    x = (0.5 * (x + x.adjoint())).eval();
}

/// tr(A * B) for square A, B without forming the product.
inline cdouble trace_of_product(const CMatrix &a, const CMatrix &b)
{
    return (a.array() * b.transpose().array()).sum();
}

} // namespace polymud
