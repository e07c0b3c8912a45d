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

// Matched filter, polynomial expansion and LMMSE detectors for y = Hx + n.
//
// The polynomial detector is x^ = H^H sum_{l<L} w_l B^l y. Its MSE-optimal weights solve
// Phi w = phi with [Phi]_ij = mu_{i+j} + sigma^2 mu_{i+j-1}, [phi]_i = mu_i, i, j = 1..L,
// where w_{i-1} pairs with row i. The SINR of user k uses the same structure with the
// Krylov forms [B^n]_kk = h_k^H B^{n-1} h_k in place of the global moments.

#pragma once

#include "channel_models.hpp"
#include "moment_engine.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

namespace polymud
{

/// Hankel systems above this condition number are flagged; above `conditioning_limit` they are rejected.
inline constexpr double conditioning_warning = 1e12;
inline constexpr double conditioning_limit = 1e15;

struct DetectorWeights
{
    RVector coefficients; // w_0 .. w_{L-1}
    int rank = 0;
    double noise_power = 0;
    Provenance provenance = Provenance::asymptotic;
    double condition_estimate = 1;
    bool ill_conditioned = false;
};

enum class Method
{
    matched,
    poly,
    lmmse,
    lmmse_asymptotic,
    poly_asymptotic
};

inline std::string to_string(Method m)
{
    switch (m)
    {
    case Method::matched: return "matched";
    case Method::poly: return "poly";
    case Method::lmmse: return "lmmse";
    case Method::lmmse_asymptotic: return "lmmse-asymptotic";
    case Method::poly_asymptotic: return "poly-asymptotic";
    }
    return "unknown";
}

struct SinrReport
{
    Index user = 0;
    double gamma = 0;
    Method method = Method::poly;
    int rank = 1;
    double snr = 0; // 1 / sigma^2
    double ber_bpsk = 0.5;
};

/// Q(sqrt(gamma)) = erfc(sqrt(gamma / 2)) / 2.
inline double ber_bpsk(double gamma)
{
    if (!(gamma >= 0))
        throw domain_error("ber_bpsk: gamma must be nonnegative");
    return 0.5 * std::erfc(std::sqrt(gamma / 2.0));
}

// ----- Weights ------------------------------------------------------------

/// (Phi, phi) from moments mu_0 .. mu_{2L}.
inline std::pair<RMatrix, RVector> build_weight_system(const RVector &mu, double sigma2, int rank)
{
    if (rank < 1)
        throw domain_error("build_weight_system: rank must be at least 1");
    if (!(sigma2 >= 0))
        throw domain_error("build_weight_system: noise power must be nonnegative");
    if (mu.size() < 2 * rank + 1)
        throw domain_error("build_weight_system: moments up to order " + std::to_string(2 * rank) +
                           " are required");
    RMatrix phi_mat(rank, rank);
    RVector phi_vec(rank);
    for (int i = 1; i <= rank; ++i)
    {
        phi_vec(i - 1) = mu(i);
        for (int j = 1; j <= rank; ++j)
            phi_mat(i - 1, j - 1) = mu(i + j) + sigma2 * mu(i + j - 1);
    }
    return {std::move(phi_mat), std::move(phi_vec)};
}

inline std::pair<RMatrix, RVector> build_weight_system(const MomentTable &t, double sigma2, int rank)
{
    return build_weight_system(t.global, sigma2, rank);
}

/// w = Phi^{-1} phi through a symmetric (diagonally equilibrated) LDL^T solve.
inline DetectorWeights solve_weights(const RMatrix &phi_mat, const RVector &phi_vec, double noise_power = 0,
                                     Provenance provenance = Provenance::asymptotic)
{
    const Index l = phi_mat.rows();
    if (l < 1 || phi_mat.cols() != l || phi_vec.size() != l)
        throw domain_error("solve_weights: dimension mismatch");
    if (!phi_mat.allFinite() || !phi_vec.allFinite())
        throw numeric_error("solve_weights: non-finite system", 0.0);

    const RVector diag = phi_mat.diagonal();
    if ((diag.array() <= 0).any())
        throw conditioning_error("solve_weights: Hankel system is singular (nonpositive diagonal)",
                                 diag.minCoeff());
    const RVector d = diag.cwiseSqrt().cwiseInverse();
    const RMatrix scaled = d.asDiagonal() * phi_mat * d.asDiagonal();

    // L is small, so the exact 2-norm condition number is cheap and more reliable than an estimate.
    const RVector ev = Eigen::SelfAdjointEigenSolver<RMatrix>(scaled, Eigen::EigenvaluesOnly).eigenvalues();
    const double cond = ev(0) > 0 ? ev(l - 1) / ev(0) : std::numeric_limits<double>::infinity();
    Eigen::LDLT<RMatrix> ldlt(scaled);
    if (ldlt.info() != Eigen::Success || !(cond < conditioning_limit))
        throw conditioning_error("solve_weights: Hankel moment system is numerically singular at rank " +
                                     std::to_string(l),
                                 cond);

    DetectorWeights w;
    w.coefficients = d.asDiagonal() * ldlt.solve(d.asDiagonal() * phi_vec);
    if (!w.coefficients.allFinite())
        throw numeric_error("solve_weights: non-finite weights", cond);
    w.rank = static_cast<int>(l);
    w.noise_power = noise_power;
    w.provenance = provenance;
    w.condition_estimate = cond;
    w.ill_conditioned = cond > conditioning_warning;
    return w;
}

/// Weights from a moment table (empirical or asymptotic).
inline DetectorWeights optimal_weights(const MomentTable &t, double sigma2, int rank)
{
    const auto [phi_mat, phi_vec] = build_weight_system(t, sigma2, rank);
    return solve_weights(phi_mat, phi_vec, sigma2, t.provenance);
}

/// Weights with the given coefficients, e.g. the matched filter {1}.
inline DetectorWeights fixed_weights(RVector coefficients, double noise_power)
{
    DetectorWeights w;
    w.rank = static_cast<int>(coefficients.size());
    w.coefficients = std::move(coefficients);
    w.noise_power = noise_power;
    w.provenance = Provenance::empirical;
    return w;
}

// ----- Detection ----------------------------------------------------------

/// Multistage evaluation of H^H sum_l w_l B^l Y for every column of Y (N x S). Never forms B.
inline CMatrix poly_detect_batch(const ChannelRealization &ch, const CMatrix &y, const DetectorWeights &w)
{
    if (y.rows() != ch.n_rx())
        throw domain_error("poly_detect: received vector has wrong length");
    if (w.coefficients.size() < 1)
        throw domain_error("poly_detect: empty weight vector");
    CMatrix a = ch.h.adjoint() * y; // matched filter stage
    CMatrix out = w.coefficients(0) * a;
    for (Index l = 1; l < w.coefficients.size(); ++l)
    {
        const CMatrix v = ch.h * a; // re-spreading
        a.noalias() = ch.h.adjoint() * v;
        out += w.coefficients(l) * a;
    }
    return out;
}

inline CVector poly_detect(const ChannelRealization &ch, const CVector &y, const DetectorWeights &w)
{
    return poly_detect_batch(ch, y, w).col(0);
}

/// H^H (B + sigma^2 I)^{-1} Y.
inline CMatrix lmmse_detect_batch(const ChannelRealization &ch, const CMatrix &y, double sigma2)
{
    if (!(sigma2 > 0))
        throw domain_error("lmmse_detect: noise power must be positive");
    if (y.rows() != ch.n_rx())
        throw domain_error("lmmse_detect: received vector has wrong length");
    CMatrix a = ch.h * ch.h.adjoint();
    a.diagonal().array() += sigma2;
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw numeric_error("lmmse_detect: factorization failed", 0.0);
    return ch.h.adjoint() * llt.solve(y);
}

inline CVector lmmse_detect(const ChannelRealization &ch, const CVector &y, double sigma2)
{
    return lmmse_detect_batch(ch, y, sigma2).col(0);
}

// ----- SINR ---------------------------------------------------------------

/// gamma = (w^T phi_k)^2 / (w^T Phi_k w - (w^T phi_k)^2) from per-user moments m_0 .. m_{2L}.
/// Throws numeric_error when the denominator is not positive.
inline double sinr_from_moments(const RVector &user_moments, const RVector &w, double sigma2)
{
    const auto l = static_cast<int>(w.size());
    const auto [phi_k, phi_vec] = build_weight_system(user_moments, sigma2, l);
    const double signal_amp = w.dot(phi_vec);
    const double total = w.dot(phi_k * w);
    const double signal = signal_amp * signal_amp;
    const double denom = total - signal;
    if (!(denom > 1e-14 * std::abs(total)))
        throw numeric_error("sinr: interference-plus-noise power is not positive", denom);
    return signal / denom;
}

inline SinrReport make_report(Index k, double gamma, Method m, int rank, double sigma2)
{
    SinrReport r;
    r.user = k;
    r.gamma = gamma;
    r.method = m;
    r.rank = rank;
    r.snr = 1.0 / sigma2;
    r.ber_bpsk = ber_bpsk(gamma);
    return r;
}

/// Exact SINR of the polynomial detector for user k on a realization, sigma^2 = w.noise_power.
inline SinrReport sinr_exact(const ChannelRealization &ch, const DetectorWeights &w, Index k)
{
    const RVector m = empirical_user_moments(ch, k, 2 * w.rank);
    const double g = sinr_from_moments(m, w.coefficients, w.noise_power);
    return make_report(k, g, Method::poly, w.rank, w.noise_power);
}

/// Deterministic SINR: per-user moments (K x (2L+1) or more) in place of the Krylov forms.
inline SinrReport sinr_asymptotic(const RMatrix &per_user, const DetectorWeights &w, double sigma2, Index k)
{
    if (k < 0 || k >= per_user.rows())
        throw domain_error("sinr_asymptotic: user index out of range");
    if (per_user.cols() < 2 * w.rank + 1)
        throw domain_error("sinr_asymptotic: per-user moments up to order 2L are required");
    const double g = sinr_from_moments(per_user.row(k).transpose(), w.coefficients, sigma2);
    return make_report(k, g, Method::poly_asymptotic, w.rank, sigma2);
}

/// Matched filter x^ = H^H y (polynomial detector with L = 1).
inline SinrReport matched_filter_sinr(const ChannelRealization &ch, double sigma2, Index k)
{
    auto r = sinr_exact(ch, fixed_weights(RVector::Ones(1), sigma2), k);
    r.method = Method::matched;
    return r;
}

/// h_k^H (B_{-k} + sigma^2 I)^{-1} h_k with B_{-k} = B - h_k h_k^H.
inline SinrReport lmmse_sinr_exact(const ChannelRealization &ch, double sigma2, Index k)
{
    if (!(sigma2 > 0))
        throw domain_error("lmmse_sinr_exact: noise power must be positive");
    if (k < 0 || k >= ch.n_tx())
        throw domain_error("lmmse_sinr_exact: user index out of range");
    const CVector hk = ch.h.col(k);
    CMatrix a = ch.h * ch.h.adjoint();
    a.noalias() -= hk * hk.adjoint();
    a.diagonal().array() += sigma2;
    symmetrize(a);
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw numeric_error("lmmse_sinr_exact: factorization failed", 0.0);
    const double g = hk.dot(llt.solve(hk)).real();
    return make_report(k, g, Method::lmmse, static_cast<int>(std::min(ch.n_rx(), ch.n_tx())), sigma2);
}

/// All users from the K x K Gram: gamma_k = 1 / (sigma^2 [(H^H H + sigma^2 I)^{-1}]_kk) - 1.
inline RVector lmmse_sinr_all(const CMatrix &user_gram_matrix, double sigma2)
{
    if (!(sigma2 > 0))
        throw domain_error("lmmse_sinr_all: noise power must be positive");
    CMatrix a = user_gram_matrix;
    a.diagonal().array() += sigma2;
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw numeric_error("lmmse_sinr_all: factorization failed", 0.0);
    const CMatrix inv = llt.solve(CMatrix::Identity(a.rows(), a.cols()));
    return (sigma2 * inv.diagonal().real()).cwiseInverse().array() - 1.0;
}

// ----- Monte Carlo SINR ---------------------------------------------------

/// Linear detector acting on a block of received vectors (N x S) -> (K x S).
using BatchDetector = std::function<CMatrix(const CMatrix &)>;

/// Empirical SINR per user: signals x ~ CN(0, I), noise ~ CN(0, sigma^2 I), y = Hx + n.
/// `gains(k)` is the known useful gain of user k, so the residual x^_k - gains(k) x_k is the
/// interference plus noise whose sample power forms the denominator.
inline RVector monte_carlo_sinr(const ChannelRealization &ch, double sigma2, const BatchDetector &detect,
                                const CVector &gains, long samples, std::uint64_t seed, long block = 4096)
{
    const Index n = ch.n_rx(), k = ch.n_tx();
    if (gains.size() != k)
        throw domain_error("monte_carlo_sinr: one gain per user is required");
    Rng rng(seed);
    RVector err = RVector::Zero(k);
    long done = 0;
    while (done < samples)
    {
        const Index s = static_cast<Index>(std::min(block, samples - done));
        const CMatrix x = draw_entries(k, s, rng, EntryLaw::gaussian);
        const CMatrix noise = std::sqrt(sigma2) * draw_entries(n, s, rng, EntryLaw::gaussian);
        const CMatrix y = ch.h * x + noise;
        const CMatrix xh = detect(y);
        const CMatrix resid = xh - gains.asDiagonal() * x;
        err += resid.cwiseAbs2().rowwise().sum();
        done += s;
    }
    err /= static_cast<double>(samples);
    return gains.cwiseAbs2().cwiseQuotient(err);
}

} // namespace polymud
