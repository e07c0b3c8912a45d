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

// Reference computations used only for validation. None of these share code paths with
// the library routines they check.

#pragma once

#include "channel_models.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace polymud::oracle
{

inline double binomial(int n, int k)
{
    if (k < 0 || k > n)
        return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

inline double factorial(int n)
{
    double r = 1.0;
    for (int i = 2; i <= n; ++i)
        r *= i;
    return r;
}

/// Marchenko-Pastur moments at ratio c = N/K: sum_{r=0}^{n-1} c^r/(r+1) C(n,r) C(n-1,r).
inline double mp_moment(double c, int n)
{
    if (n == 0)
        return 1.0;
    double s = 0;
    for (int r = 0; r < n; ++r)
        s += std::pow(c, r) / (r + 1) * binomial(n, r) * binomial(n - 1, r);
    return s;
}

/// Stieltjes transform of the Marchenko-Pastur law at ratio c and real z < 0: the positive
/// root of c z m^2 + (z + c - 1) m + 1 = 0.
inline double mp_stieltjes(double c, double z)
{
    const double a = c * z, b = z + c - 1.0;
    const double disc = std::sqrt(b * b - 4.0 * a);
    const double r1 = (-b + disc) / (2 * a), r2 = (-b - disc) / (2 * a);
    return r1 > 0 ? r1 : r2;
}

/// Literal derivative recursion at z = 0 with explicit binomials and factorials, one entry
/// per column. Returns mu_0 .. mu_{n_max} and the rescaled per-column delta^_{k,n}.
struct NaiveMoments
{
    std::vector<double> mu;
    RMatrix delta_hat; // K x (n_max + 1)
};

inline NaiveMoments naive_recursion(const CorrelationProfile &p, int n_max)
{
    const Index n = p.n_rx(), kk = p.n_tx();
    const double k = static_cast<double>(kk);
    std::vector<CMatrix> rr;
    for (Index j = 0; j < kk; ++j)
    {
        const CMatrix r = p.column_factor(j);
        rr.push_back(r * r.adjoint());
    }

    const auto sz = static_cast<std::size_t>(n_max) + 2;
    std::vector<CMatrix> t(sz), q(sz);
    RMatrix f = RMatrix::Zero(kk, n_max + 2), delta = RMatrix::Zero(kk, n_max + 2);
    t[0] = CMatrix::Identity(n, n);
    for (Index j = 0; j < kk; ++j)
    {
        f(j, 0) = -1.0;
        delta(j, 0) = rr[static_cast<std::size_t>(j)].trace().real() / k;
    }
    for (int m = 0; m < n_max; ++m)
    {
        CMatrix qn = CMatrix::Zero(n, n);
        for (Index j = 0; j < kk; ++j)
            qn += f(j, m) * rr[static_cast<std::size_t>(j)];
        q[static_cast<std::size_t>(m + 1)] = (static_cast<double>(m + 1) / k) * qn;

        CMatrix tn = CMatrix::Zero(n, n);
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= i; ++j)
                tn += binomial(m, i) * binomial(i, j) * t[static_cast<std::size_t>(m - i)] *
                      q[static_cast<std::size_t>(i - j + 1)] * t[static_cast<std::size_t>(j)];
        t[static_cast<std::size_t>(m + 1)] = tn;

        for (Index kx = 0; kx < kk; ++kx)
        {
            delta(kx, m + 1) = (rr[static_cast<std::size_t>(kx)] * tn).trace().real() / k;
            double acc = 0;
            for (int i = 0; i <= m; ++i)
                for (int j = 0; j <= i; ++j)
                    acc += binomial(m, i) * binomial(i, j) * (m - i + 1) * f(kx, j) * f(kx, i - j) * delta(kx, m - i);
            f(kx, m + 1) = acc;
        }
    }

    NaiveMoments out;
    out.delta_hat = RMatrix(kk, n_max + 1);
    for (int m = 0; m <= n_max; ++m)
    {
        const double scale = (m % 2 == 0 ? 1.0 : -1.0) / factorial(m);
        out.mu.push_back(scale * t[static_cast<std::size_t>(m)].trace().real() / static_cast<double>(n));
        out.delta_hat.col(m) = scale * delta.col(m).head(kk);
    }
    return out;
}

/// Gaussian tail Q(x) = 1/2 - phi-series, summed term by term (adequate for |x| <= 5).
inline double q_function_series(double x)
{
    double term = x, sum = x;
    for (int n = 1; n < 200; ++n)
    {
        term *= -x * x / (2.0 * n);
        sum += term / (2.0 * n + 1.0);
    }
    return 0.5 - sum / std::sqrt(2.0 * std::numbers::pi);
}

/// Dense H^H (sum_l w_l B^l) y with B formed explicitly.
inline CVector dense_poly_detect(const CMatrix &h, const CVector &y, const RVector &w)
{
    const CMatrix b = h * h.adjoint();
    CMatrix p = CMatrix::Zero(b.rows(), b.cols());
    CMatrix bl = CMatrix::Identity(b.rows(), b.cols());
    for (Index l = 0; l < w.size(); ++l)
    {
        p += w(l) * bl;
        bl = (bl * b).eval();
    }
    return h.adjoint() * (p * y);
}

} // namespace polymud::oracle
