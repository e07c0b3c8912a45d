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

// Deterministic moment approximations of B = HH^H and empirical moments of realized channels.
//
// The recursion is carried in scaled form. With X_n = (-1)^n n! X^_n applied to the
// derivative sequences T_n, Q_n, f_{k,n}, delta_{k,n} at z = 0, the binomials cancel and
//
//   A^_{n+1}     = 1/(n+1) sum_{i=0}^{n} sum_{j=0}^{i} (i-j+1) A^_{n-i} q^_{i-j+1} A^_j
//   q^_{n+1}     = -(1/K) sum_k f^_{k,n} R_k R_k^H
//   f^_{k,n+1}   = -1/(n+1) sum_{i=0}^{n} sum_{j=0}^{i} (n-i+1) f^_{k,j} f^_{k,i-j} delta^_{k,n-i}
//   delta^_{k,n} = (1/K) tr R_k R_k^H A^_n
//
// with A^_0 = I, f^_{k,0} = -1 and mu_n = (1/N) tr A^_n. Every scaled quantity stays
// of the order of the moments themselves, so there are no factorial magnitudes.
//
// The double sum for A^_{n+1} is regrouped by the outer factor A^_a:
//   A^_{n+1} = 1/(n+1) sum_{a=0}^{n} A^_a V_{n+1-a},   V_c = sum_{s=1}^{c} s q^_s A^_{c-s},
// and V_c does not depend on n. One recursion step therefore costs about 2n products of
// N x N matrices, O(n_max^2 N^3) overall, plus O(n_max M N^2) for the class sums.

#pragma once

#include "channel_models.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace polymud
{

enum class Provenance
{
    empirical,
    asymptotic
};

inline std::string to_string(Provenance p)
{
    return p == Provenance::empirical ? "empirical" : "asymptotic";
}

/// Scaled recursion state up to `order`. Column-dependent quantities are stored per column class.
struct MomentRecursionState
{
    Index n_rx = 0;
    Index n_tx = 0;
    int order = 0;
    std::vector<CMatrix> a_hat;     // n = 0 .. order
    std::vector<CMatrix> q_hat;     // n = 0 .. order, q_hat[0] unused (empty)
    RMatrix f_hat;                  // classes x (order + 1)
    RMatrix delta_hat;              // classes x (order + 1)
    std::vector<ColumnClass> classes;
    std::vector<Index> class_of;    // column -> class
};

struct MomentTable
{
    RVector global;                 // mu_0 .. mu_order
    std::optional<RMatrix> per_user; // K x (order + 1)
    Provenance provenance = Provenance::asymptotic;
    Index n_rx = 0;
    Index n_tx = 0;

    int order() const noexcept { return static_cast<int>(global.size()) - 1; }
};

struct RecursionOptions
{
    // Relative perturbation applied to the f^ update. Nonzero only in validation sensitivity runs.
    double test_perturbation = 0.0;
};

inline MomentRecursionState compute_recursion(const CorrelationProfile &profile, int n_max,
                                              const RecursionOptions &opts = {})
{
    if (n_max < 0)
        throw domain_error("compute_recursion: n_max must be nonnegative");

    const Index n = profile.n_rx();
    const double k = static_cast<double>(profile.n_tx());
    const auto cls = profile.classes();
    const auto nc = static_cast<Index>(cls.size());
    const auto order = static_cast<std::size_t>(n_max);

    MomentRecursionState st;
    st.n_rx = n;
    st.n_tx = profile.n_tx();
    st.order = n_max;
    st.classes.assign(cls.begin(), cls.end());
    for (Index j = 0; j < profile.n_tx(); ++j)
        st.class_of.push_back(profile.class_of(j));
    st.a_hat.resize(order + 1);
    st.q_hat.resize(order + 1);
    st.f_hat = RMatrix::Zero(nc, n_max + 1);
    st.delta_hat = RMatrix::Zero(nc, n_max + 1);

    // (1/K) tr(R_k R_k^H X) for a class
    auto class_trace = [&](Index c, const CMatrix &x) {
        const auto &cc = cls[static_cast<std::size_t>(c)];
        return cc.power * trace_of_product(profile.gram(cc.matrix), x).real() / k;
    };

    st.a_hat[0] = CMatrix::Identity(n, n);
    for (Index c = 0; c < nc; ++c)
    {
        st.f_hat(c, 0) = -1.0;
        const auto &cc = cls[static_cast<std::size_t>(c)];
        st.delta_hat(c, 0) = cc.power * profile.gram(cc.matrix).trace().real() / k;
    }

    std::vector<CMatrix> v(order + 1);
    for (std::size_t m = 0; m < order; ++m)
    {
        const std::size_t next = m + 1;

        CMatrix q = CMatrix::Zero(n, n);
        for (Index c = 0; c < nc; ++c)
        {
            const auto &cc = cls[static_cast<std::size_t>(c)];
            q -= (static_cast<double>(cc.count) * cc.power * st.f_hat(c, static_cast<Index>(m)) / k) *
                 profile.gram(cc.matrix);
        }
        symmetrize(q);
        st.q_hat[next] = std::move(q);

        CMatrix vn = static_cast<double>(next) * st.q_hat[next];
        for (std::size_t s = 1; s < next; ++s)
            vn.noalias() += static_cast<double>(s) * (st.q_hat[s] * st.a_hat[next - s]);
        v[next] = std::move(vn);

        CMatrix a = v[next];
        for (std::size_t i = 1; i <= m; ++i)
            a.noalias() += st.a_hat[i] * v[next - i];
        a /= static_cast<double>(next);
        symmetrize(a);
        st.a_hat[next] = std::move(a);

        const auto ni = static_cast<Index>(next);
        for (Index c = 0; c < nc; ++c)
        {
            st.delta_hat(c, ni) = class_trace(c, st.a_hat[next]);

            double acc = 0;
            for (std::size_t i = 0; i <= m; ++i)
            {
                double conv = 0;
                for (std::size_t j = 0; j <= i; ++j)
                    conv += st.f_hat(c, static_cast<Index>(j)) * st.f_hat(c, static_cast<Index>(i - j));
                acc += static_cast<double>(m - i + 1) * conv * st.delta_hat(c, static_cast<Index>(m - i));
            }
            st.f_hat(c, ni) = -(1.0 + opts.test_perturbation) * acc / static_cast<double>(next);
        }
    }
    return st;
}

/// mu_n = (1/N) tr A^_n for n = 0 .. order.
inline MomentTable global_moments(const MomentRecursionState &st)
{
    MomentTable t;
    t.provenance = Provenance::asymptotic;
    t.n_rx = st.n_rx;
    t.n_tx = st.n_tx;
    t.global.resize(st.order + 1);
    for (int i = 0; i <= st.order; ++i)
        t.global(i) = st.a_hat[static_cast<std::size_t>(i)].trace().real() / static_cast<double>(st.n_rx);
    return t;
}

/// nu_n = (1/N) tr D A^_n, the deterministic counterpart of (1/N) tr D B^n.
inline RVector weighted_moments(const MomentRecursionState &st, const CMatrix &d)
{
    if (d.rows() != st.n_rx || d.cols() != st.n_rx)
        throw domain_error("weighted_moments: D must be N x N");
    RVector out(st.order + 1);
    for (int i = 0; i <= st.order; ++i)
        out(i) = trace_of_product(d, st.a_hat[static_cast<std::size_t>(i)]).real() / static_cast<double>(st.n_rx);
    return out;
}

/// Per-user moments mu^k_n = sum_{i=0}^{n-1} mu^k_{n-1-i} delta^_{k,i}, mu^k_0 = 1.
/// Returns K x (n_max + 1). Needs state.order >= n_max - 1.
inline RMatrix per_user_moments(const MomentRecursionState &st, int n_max)
{
    if (n_max < 0)
        throw domain_error("per_user_moments: n_max must be nonnegative");
    if (st.order < n_max - 1)
        throw domain_error("per_user_moments: recursion order " + std::to_string(st.order) +
                           " is too low for n_max " + std::to_string(n_max));
    const auto nc = static_cast<Index>(st.classes.size());
    RMatrix per_class = RMatrix::Zero(nc, n_max + 1);
    for (Index c = 0; c < nc; ++c)
    {
        per_class(c, 0) = 1.0;
        for (int m = 1; m <= n_max; ++m)
        {
            double acc = 0;
            for (int i = 0; i < m; ++i)
                acc += per_class(c, m - 1 - i) * st.delta_hat(c, i);
            per_class(c, m) = acc;
        }
    }
    RMatrix out(st.n_tx, n_max + 1);
    for (Index j = 0; j < st.n_tx; ++j)
        out.row(j) = per_class.row(st.class_of[static_cast<std::size_t>(j)]);
    return out;
}

/// Asymptotic table with global moments to `order` and per-user moments to `order`.
inline MomentTable asymptotic_table(const MomentRecursionState &st)
{
    MomentTable t = global_moments(st);
    t.per_user = per_user_moments(st, st.order);
    return t;
}

// ----- Empirical moments -------------------------------------------------

/// mu_n = (1/N) tr B^n by iterated multiplication.
inline MomentTable empirical_moments(const CMatrix &b, int n_max)
{
    if (n_max < 0)
        throw domain_error("empirical_moments: n_max must be nonnegative");
    if (b.rows() != b.cols())
        throw domain_error("empirical_moments: B must be square");
    MomentTable t;
    t.provenance = Provenance::empirical;
    t.n_rx = b.rows();
    t.global.resize(n_max + 1);
    const double n = static_cast<double>(b.rows());
    CMatrix p = CMatrix::Identity(b.rows(), b.cols());
    t.global(0) = 1.0;
    for (int i = 1; i <= n_max; ++i)
    {
        p = (b * p).eval();
        t.global(i) = p.trace().real() / n;
    }
    return t;
}

/// Same as above from a realization, iterating on the smaller of HH^H and H^H H.
inline MomentTable empirical_moments(const ChannelRealization &ch, int n_max)
{
    const Index n = ch.n_rx(), k = ch.n_tx();
    MomentTable t;
    if (k < n)
    {
        t = empirical_moments(user_gram(ch), n_max);
        // traces agree for n >= 1; normalization is by N
        t.global.tail(n_max) *= static_cast<double>(k) / static_cast<double>(n);
    }
    else
    {
        CMatrix b = ch.gram ? *ch.gram : CMatrix(ch.h * ch.h.adjoint());
        t = empirical_moments(b, n_max);
    }
    t.n_rx = n;
    t.n_tx = k;
    return t;
}

/// Krylov quadratic forms h_k^H B^{n-1} h_k for n = 1 .. n_max; entry 0 is 1 by convention.
/// Complex-valued so that callers can inspect the (rounding-only) imaginary parts.
inline CVector krylov_forms(const ChannelRealization &ch, Index k, int n_max)
{
    if (k < 0 || k >= ch.n_tx())
        throw domain_error("krylov_forms: user index out of range");
    if (n_max < 0)
        throw domain_error("krylov_forms: n_max must be nonnegative");
    CVector out(n_max + 1);
    out(0) = 1.0;
    const CVector hk = ch.h.col(k);
    CVector u = hk;
    for (int m = 1; m <= n_max; ++m)
    {
        out(m) = hk.dot(u); // conjugates the first argument
        const CVector t = ch.h.adjoint() * u;
        u = ch.h * t;
    }
    return out;
}

/// [B^n]_kk := h_k^H B^{n-1} h_k for n = 0 .. n_max (value 1 at n = 0).
inline RVector empirical_user_moments(const ChannelRealization &ch, Index k, int n_max)
{
    return krylov_forms(ch, k, n_max).real();
}

/// All users at once: [(H^H H)^n]_kk, K x (n_max + 1).
inline RMatrix empirical_user_moments_all(const CMatrix &user_gram_matrix, int n_max)
{
    const Index k = user_gram_matrix.rows();
    RMatrix out(k, n_max + 1);
    out.col(0).setOnes();
    CMatrix p = CMatrix::Identity(k, k);
    for (int m = 1; m <= n_max; ++m)
    {
        p = (user_gram_matrix * p).eval();
        out.col(m) = p.diagonal().real();
    }
    return out;
}

/// Hankel matrix [mu_{i+j+offset}] for i, j = 0 .. size-1.
inline RMatrix hankel_matrix(const RVector &mu, Index size, Index offset = 0)
{
    if (2 * (size - 1) + offset >= mu.size())
        throw domain_error("hankel_matrix: not enough moments");
    RMatrix h(size, size);
    for (Index i = 0; i < size; ++i)
        for (Index j = 0; j < size; ++j)
            h(i, j) = mu(i + j + offset);
    return h;
}

/// CSV (CRLF line ends): n,mu_global,mu_user_1..mu_user_K,provenance,N,K
inline void write_moment_csv(std::ostream &out, const MomentTable &t)
{
    const Index k = t.per_user ? t.per_user->rows() : 0;
    out << "n,mu_global";
    for (Index j = 0; j < k; ++j)
        out << ",mu_user_" << (j + 1);
    out << ",provenance,N,K\r\n";
    const auto prec = out.precision(17);
    for (Index i = 0; i < t.global.size(); ++i)
    {
        out << i << ',' << t.global(i);
        for (Index j = 0; j < k; ++j)
            out << ',' << (i < t.per_user->cols() ? (*t.per_user)(j, i) : 0.0);
        out << ',' << to_string(t.provenance) << ',' << t.n_rx << ',' << t.n_tx << "\r\n";
    }
    out.precision(prec);
}

} // namespace polymud
