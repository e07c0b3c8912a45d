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

// Deterministic equivalent of the resolvent (B - zI)^{-1} on the negative real axis:
//
//   T(z)       = ( (1/K) sum_j R_j R_j^H / (1 + delta_j(z)) - z I )^{-1}
//   delta_j(z) = (1/K) tr R_j R_j^H T(z)
//
// solved by Picard iteration over the column classes of the profile.

#pragma once

#include "channel_models.hpp"

#include <cmath>
#include <vector>

namespace polymud
{

struct FixedPointOptions
{
    double tol = 1e-12;
    long max_iter = 10000;
    double damping = 0.0; // delta <- (1 - damping) F(delta) + damping delta
};

struct FixedPointSolution
{
    double z = 0;
    CMatrix t_matrix;
    RVector deltas;              // per column class
    std::vector<Index> class_of; // column -> class
    long iterations = 0;
    double residual = 0;         // max relative violation of the delta equations at the returned point

    double delta_for_column(Index j) const { return deltas(class_of.at(static_cast<std::size_t>(j))); }
};

namespace detail
{
inline CMatrix resolvent_equivalent(const CorrelationProfile &p, const RVector &deltas, double z)
{
    const Index n = p.n_rx();
    const double k = static_cast<double>(p.n_tx());
    const auto cls = p.classes();
    CMatrix s = CMatrix::Zero(n, n);
    for (std::size_t c = 0; c < cls.size(); ++c)
        s += (static_cast<double>(cls[c].count) * cls[c].power / (k * (1.0 + deltas(static_cast<Index>(c))))) *
             p.gram(cls[c].matrix);
    s.diagonal().array() -= z;
    symmetrize(s);
    Eigen::LLT<CMatrix> llt(s);
    if (llt.info() != Eigen::Success)
        throw numeric_error("fixed point: system matrix lost positive definiteness", 0.0);
    CMatrix t = llt.solve(CMatrix::Identity(n, n));
    symmetrize(t);
    return t;
}

inline RVector class_deltas(const CorrelationProfile &p, const CMatrix &t)
{
    const double k = static_cast<double>(p.n_tx());
    const auto cls = p.classes();
    RVector d(static_cast<Index>(cls.size()));
    for (std::size_t c = 0; c < cls.size(); ++c)
        d(static_cast<Index>(c)) = cls[c].power * trace_of_product(p.gram(cls[c].matrix), t).real() / k;
    return d;
}

inline double max_relative_change(const RVector &next, const RVector &prev)
{
    double r = 0;
    for (Index i = 0; i < next.size(); ++i)
    {
        const double diff = std::abs(next(i) - prev(i));
        r = std::max(r, prev(i) > 0 ? diff / prev(i) : diff);
    }
    return r;
}
} // namespace detail

/// Solves the fixed point at real z < 0, starting from delta_m = (1/K) tr R_m R_m^H.
inline FixedPointSolution solve_fixed_point(const CorrelationProfile &profile, double z,
                                            const FixedPointOptions &opts = {})
{
    if (!(z < 0))
        throw domain_error("fixed point: z must be strictly negative");
    if (!(opts.tol > 0))
        throw domain_error("fixed point: tolerance must be positive");
    if (!(opts.damping >= 0 && opts.damping < 1))
        throw domain_error("fixed point: damping must lie in [0, 1)");

    const double k = static_cast<double>(profile.n_tx());
    const auto cls = profile.classes();
    RVector delta(static_cast<Index>(cls.size()));
    for (std::size_t c = 0; c < cls.size(); ++c)
        delta(static_cast<Index>(c)) = cls[c].power * profile.gram(cls[c].matrix).trace().real() / k;

    FixedPointSolution sol;
    sol.z = z;
    for (Index j = 0; j < profile.n_tx(); ++j)
        sol.class_of.push_back(profile.class_of(j));

    double change = 0;
    for (long it = 1;; ++it)
    {
        const CMatrix t = detail::resolvent_equivalent(profile, delta, z);
        RVector next = detail::class_deltas(profile, t);
        if (opts.damping > 0)
            next = (1 - opts.damping) * next + opts.damping * delta;
        change = detail::max_relative_change(next, delta);
        delta = std::move(next);
        if (change <= opts.tol)
        {
            sol.iterations = it;
            break;
        }
        if (it >= opts.max_iter)
            throw convergence_error("fixed point: no convergence", change, it);
    }

    sol.deltas = delta;
    sol.t_matrix = detail::resolvent_equivalent(profile, delta, z);
    sol.residual = detail::max_relative_change(detail::class_deltas(profile, sol.t_matrix), delta);
    return sol;
}

/// m(z) = (1/N) tr T(z).
inline double stieltjes_m(const FixedPointSolution &sol)
{
    return sol.t_matrix.trace().real() / static_cast<double>(sol.t_matrix.rows());
}

/// Deterministic LMMSE SINR of every user, (1/K) tr R_k R_k^H T(-1/snr) = delta_k(-1/snr).
inline RVector lmmse_asymptotic_sinr_all(const CorrelationProfile &profile, double snr,
                                         const FixedPointOptions &opts = {})
{
    if (!(snr > 0))
        throw domain_error("lmmse_asymptotic_sinr: snr must be positive");
    const auto sol = solve_fixed_point(profile, -1.0 / snr, opts);
    RVector out(profile.n_tx());
    for (Index j = 0; j < profile.n_tx(); ++j)
        out(j) = sol.delta_for_column(j);
    return out;
}

inline double lmmse_asymptotic_sinr(const CorrelationProfile &profile, Index k, double snr,
                                    const FixedPointOptions &opts = {})
{
    if (k < 0 || k >= profile.n_tx())
        throw domain_error("lmmse_asymptotic_sinr: user index out of range");
    if (!(snr > 0))
        throw domain_error("lmmse_asymptotic_sinr: snr must be positive");
    return solve_fixed_point(profile, -1.0 / snr, opts).delta_for_column(k);
}

} // namespace polymud
