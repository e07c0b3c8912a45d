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

// Correlation profiles {R_j} and random channel draws.
//
// The channel H = [h_1 ... h_K] has columns h_j = R_j w_j / sqrt(K), where w_j has
// i.i.d. zero-mean unit-variance entries. A profile stores the M distinct base
// factors R~_m, their Gram matrices R~_m R~_m^H, a column-to-matrix assignment and
// a per-column scale s_j, so that R_j = s_j R~_{assignment[j]}.

#pragma once

#include "core.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace polymud
{

/// A group of columns sharing the same R_j R_j^H = power * gram(matrix).
struct ColumnClass
{
    Index matrix = 0;  // index into the distinct matrices
    double power = 1;  // s_j^2
    Index count = 0;   // number of columns in the class
};

namespace detail
{
struct SqrtResult
{
    CMatrix root;
    double norm = 0; // spectral norm of the input
};

inline SqrtResult psd_sqrt_impl(const CMatrix &theta, double clip_rel)
{
    if (theta.rows() != theta.cols())
        throw domain_error("psd_sqrt: matrix must be square");
    if (theta.size() == 0)
        return {theta, 0.0};

    const double scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
    if ((theta - theta.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw domain_error("psd_sqrt: matrix is not Hermitian");

    Eigen::SelfAdjointEigenSolver<CMatrix> es(theta);
    if (es.info() != Eigen::Success)
        throw numeric_error("psd_sqrt: eigendecomposition failed", 0.0);

    const RVector &lam = es.eigenvalues();
    const double norm = lam.cwiseAbs().maxCoeff();
    if (lam.minCoeff() < -clip_rel * norm)
        throw domain_error("psd_sqrt: matrix is not positive semidefinite (eigenvalue " +
                           std::to_string(lam.minCoeff()) + ")");

    const RVector root = lam.cwiseMax(0.0).cwiseSqrt();
    const CMatrix &u = es.eigenvectors();
    CMatrix r = u * root.asDiagonal() * u.adjoint();
    symmetrize(r);
    return {std::move(r), norm};
}

inline bool same_bytes(const CMatrix &a, const CMatrix &b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(cdouble) * static_cast<std::size_t>(a.size())) == 0;
}

inline double hermitian_norm(const CMatrix &x)
{
    if (x.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(x, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}
} // namespace detail

/// Eigenvalue clip tolerance (relative to the spectral norm) used by psd_sqrt.
inline constexpr double default_psd_clip = 1e-10;

/// Hermitian PSD square root U diag(sqrt(max(lambda, 0))) U^H.
/// Eigenvalues below -clip_rel * ||theta||_2 raise domain_error.
inline CMatrix psd_sqrt(const CMatrix &theta, double clip_rel = default_psd_clip)
{
    return detail::psd_sqrt_impl(theta, clip_rel).root;
}

// ----- CorrelationProfile ------------------------------------------------

class CorrelationProfile
{
public:
    CorrelationProfile() = default;

    /// Builds a profile from distinct factors and an assignment.
    /// `scales` defaults to all ones. `grams` and `gram_norms` are computed when empty.
    CorrelationProfile(Index n_rx, Index n_tx, std::vector<CMatrix> factors, std::vector<Index> assignment,
                       std::vector<double> scales = {}, std::vector<CMatrix> grams = {},
                       std::vector<double> gram_norms = {})
        : n_rx_(n_rx), n_tx_(n_tx), factors_(std::move(factors)), grams_(std::move(grams)),
          gram_norms_(std::move(gram_norms)), assignment_(std::move(assignment)), scales_(std::move(scales))
    {
        if (n_rx_ < 1 || n_tx_ < 1)
            throw domain_error("profile: dimensions must be positive");
        if (factors_.empty())
            throw domain_error("profile: at least one distinct matrix is required");
        if (static_cast<Index>(assignment_.size()) != n_tx_)
            throw domain_error("profile: assignment length must equal the number of transmitters");
        for (const auto &f : factors_)
            if (f.rows() != n_rx_ || f.cols() != n_rx_)
                throw domain_error("profile: every distinct matrix must be N x N");
        const auto m = static_cast<Index>(factors_.size());
        for (Index a : assignment_)
            if (a < 0 || a >= m)
                throw domain_error("profile: assignment index out of range");

        if (scales_.empty())
            scales_.assign(static_cast<std::size_t>(n_tx_), 1.0);
        if (static_cast<Index>(scales_.size()) != n_tx_)
            throw domain_error("profile: scales length must equal the number of transmitters");
        for (double s : scales_)
            if (!std::isfinite(s) || s < 0)
                throw domain_error("profile: scales must be finite and nonnegative");

        if (grams_.empty())
        {
            grams_.reserve(factors_.size());
            for (const auto &f : factors_)
            {
                CMatrix g = f * f.adjoint();
                symmetrize(g);
                grams_.push_back(std::move(g));
            }
        }
        if (grams_.size() != factors_.size())
            throw domain_error("profile: one Gram matrix per distinct matrix is required");
        for (const auto &g : grams_)
            if (g.rows() != n_rx_ || g.cols() != n_rx_)
                throw domain_error("profile: every Gram matrix must be N x N");

        if (gram_norms_.empty())
            for (const auto &g : grams_)
                gram_norms_.push_back(detail::hermitian_norm(g));
        if (gram_norms_.size() != factors_.size())
            throw domain_error("profile: one norm per distinct matrix is required");
        for (double v : gram_norms_)
            if (!std::isfinite(v))
                throw domain_error("profile: Gram spectral norm is not finite");

        build_classes();
    }

    /// Builds a profile from one factor per column, merging byte-identical factors.
    /// `grams`, when given, must be aligned with `per_column` and is deduplicated alongside.
    static CorrelationProfile from_columns(Index n_rx, std::vector<CMatrix> per_column,
                                           std::vector<CMatrix> grams = {}, std::vector<double> norms = {})
    {
        const bool with_grams = !grams.empty();
        const bool with_norms = !norms.empty();
        if ((with_grams && grams.size() != per_column.size()) || (with_norms && norms.size() != per_column.size()))
            throw domain_error("profile: per-column inputs must have equal length");

        std::vector<CMatrix> distinct, distinct_grams;
        std::vector<double> distinct_norms;
        std::vector<Index> assignment;
        assignment.reserve(per_column.size());
        for (std::size_t j = 0; j < per_column.size(); ++j)
        {
            auto it = std::find_if(distinct.begin(), distinct.end(),
                                   [&](const CMatrix &d) { return detail::same_bytes(d, per_column[j]); });
            if (it != distinct.end())
            {
                assignment.push_back(static_cast<Index>(it - distinct.begin()));
                continue;
            }
            assignment.push_back(static_cast<Index>(distinct.size()));
            distinct.push_back(std::move(per_column[j]));
            if (with_grams)
                distinct_grams.push_back(std::move(grams[j]));
            if (with_norms)
                distinct_norms.push_back(norms[j]);
        }
        const auto k = static_cast<Index>(assignment.size());
        return CorrelationProfile(n_rx, k, std::move(distinct), std::move(assignment), {}, std::move(distinct_grams),
                                  std::move(distinct_norms));
    }

    Index n_rx() const noexcept { return n_rx_; }
    Index n_tx() const noexcept { return n_tx_; }
    Index distinct_count() const noexcept { return static_cast<Index>(factors_.size()); }

    const CMatrix &factor(Index m) const { return factors_.at(static_cast<std::size_t>(m)); }
    const CMatrix &gram(Index m) const { return grams_.at(static_cast<std::size_t>(m)); }
    double gram_norm(Index m) const { return gram_norms_.at(static_cast<std::size_t>(m)); }
    std::span<const Index> assignment() const noexcept { return assignment_; }
    std::span<const double> scales() const noexcept { return scales_; }
    double scale(Index j) const { return scales_.at(static_cast<std::size_t>(j)); }

    /// R_j = s_j R~_{assignment[j]}.
    CMatrix column_factor(Index j) const { return scale(j) * factor(assignment_.at(static_cast<std::size_t>(j))); }

    /// R_j R_j^H.
    CMatrix column_gram(Index j) const
    {
        const double s = scale(j);
        return (s * s) * gram(assignment_.at(static_cast<std::size_t>(j)));
    }

    /// Column groups with identical R_j R_j^H; the recursion and the fixed point iterate over these.
    std::span<const ColumnClass> classes() const noexcept { return classes_; }
    Index class_of(Index j) const { return class_of_.at(static_cast<std::size_t>(j)); }

    /// Asymptotic upper bound on ||HH^H||_2: M R sup_m (K_m/K)(1 + sqrt(N/K_m))^2 with
    /// R >= sup ||R_j R_j^H|| and K_m the size of each column class.
    double spectral_norm_bound() const
    {
        double r = 0, sup = 0;
        for (const auto &c : classes_)
        {
            r = std::max(r, c.power * gram_norm(c.matrix));
            const double km = static_cast<double>(c.count);
            const double v = km / static_cast<double>(n_tx_) *
                             std::pow(1.0 + std::sqrt(static_cast<double>(n_rx_) / km), 2);
            sup = std::max(sup, v);
        }
        return static_cast<double>(classes_.size()) * r * sup;
    }

private:
    void build_classes()
    {
        classes_.clear();
        class_of_.assign(assignment_.size(), 0);
        for (std::size_t j = 0; j < assignment_.size(); ++j)
        {
            const double power = scales_[j] * scales_[j];
            auto it = std::find_if(classes_.begin(), classes_.end(), [&](const ColumnClass &c) {
                return c.matrix == assignment_[j] && c.power == power;
            });
            if (it == classes_.end())
            {
                classes_.push_back({assignment_[j], power, 0});
                it = classes_.end() - 1;
            }
            ++it->count;
            class_of_[j] = static_cast<Index>(it - classes_.begin());
        }
    }

    Index n_rx_ = 0;
    Index n_tx_ = 0;
    std::vector<CMatrix> factors_;
    std::vector<CMatrix> grams_;
    std::vector<double> gram_norms_;
    std::vector<Index> assignment_;
    std::vector<double> scales_;
    std::vector<ColumnClass> classes_;
    std::vector<Index> class_of_;
};

// ----- Scenario constructors ---------------------------------------------

/// R_j = I_N for every column (i.i.d. channel, Marchenko-Pastur limit).
inline CorrelationProfile make_identity_profile(Index n_rx, Index n_tx)
{
    if (n_rx < 1 || n_tx < 1)
        throw domain_error("identity profile: dimensions must be positive");
    const CMatrix eye = CMatrix::Identity(n_rx, n_rx);
    return CorrelationProfile(n_rx, n_tx, {eye}, std::vector<Index>(static_cast<std::size_t>(n_tx), 0), {}, {eye},
                              {1.0});
}

/// Distributed antennas: R_j = diag(r_1j, ..., r_Nj), r_ij = sqrt(p_j) / d_ij^(beta/2).
/// `distances` is N x K (receive antenna i, transmitter j).
inline CorrelationProfile make_distributed_antenna_profile(const RMatrix &distances, const RVector &powers,
                                                           double pathloss_exponent)
{
    const Index n = distances.rows(), k = distances.cols();
    if (n < 1 || k < 1)
        throw domain_error("distributed antennas: empty distance matrix");
    if (powers.size() != k)
        throw domain_error("distributed antennas: one power per transmitter is required");
    if (!(pathloss_exponent > 0) || !std::isfinite(pathloss_exponent))
        throw domain_error("distributed antennas: path loss exponent must be positive");
    if (!(distances.array() > 0).all() || !distances.allFinite())
        throw domain_error("distributed antennas: distances must be strictly positive");
    if (!(powers.array() > 0).all() || !powers.allFinite())
        throw domain_error("distributed antennas: powers must be strictly positive");

    std::vector<CMatrix> factors;
    std::vector<CMatrix> grams;
    std::vector<double> norms;
    factors.reserve(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j)
    {
        RVector r(n);
        for (Index i = 0; i < n; ++i)
            r(i) = std::sqrt(powers(j)) / std::pow(distances(i, j), pathloss_exponent / 2);
        const RVector r2 = r.cwiseAbs2();
        factors.push_back(r.cast<cdouble>().asDiagonal());
        grams.push_back(r2.cast<cdouble>().asDiagonal());
        norms.push_back(r2.maxCoeff());
    }
    return CorrelationProfile::from_columns(n, std::move(factors), std::move(grams), std::move(norms));
}

/// Angular spread [phi_min, phi_max] of one transmitter, phi_min in [-pi, 0], phi_max in [0, pi].
struct JakesInterval
{
    double phi_min = -std::numbers::pi;
    double phi_max = std::numbers::pi;
};

/// Draws phi_min ~ U[-pi, 0] and phi_max ~ U[0, pi] independently for each transmitter.
inline std::vector<JakesInterval> draw_jakes_intervals(Index n_tx, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> lo(-std::numbers::pi, 0.0), hi(0.0, std::numbers::pi);
    std::vector<JakesInterval> out(static_cast<std::size_t>(n_tx));
    for (auto &iv : out)
    {
        iv.phi_min = lo(rng);
        iv.phi_max = hi(rng);
    }
    return out;
}

namespace detail
{
// (1/width) * integral over [lo, hi] of exp(i * a1 * d * cos x) dx for d = 0 .. n_offsets-1,
// by composite 30-point Gauss-Legendre on `panels` equal panels.
inline std::vector<cdouble> jakes_offsets(Index n_offsets, double a1, double lo, double hi, long panels)
{
    using rule = boost::math::quadrature::gauss<double, 30>;
    const auto &xs = rule::abscissa();
    const auto &ws = rule::weights();

    std::vector<cdouble> acc(static_cast<std::size_t>(n_offsets), cdouble(0, 0));
    const double width = hi - lo;
    const double half = 0.5 * width / static_cast<double>(panels);

    auto add_node = [&](double x, double w) {
        const double phase = a1 * std::cos(x);
        const cdouble step = std::polar(1.0, phase);
        cdouble p(1, 0);
        for (Index d = 0; d < n_offsets; ++d)
        {
            // re-anchor the running power to keep rounding drift bounded
            if ((d & 15) == 0)
                p = std::polar(1.0, phase * static_cast<double>(d));
            acc[static_cast<std::size_t>(d)] += w * p;
            p *= step;
        }
    };

    for (long p = 0; p < panels; ++p)
    {
        const double c = lo + (2.0 * static_cast<double>(p) + 1.0) * half;
        for (std::size_t i = 0; i < xs.size(); ++i)
        {
            const double w = half * ws[i];
            if (xs[i] == 0.0)
            {
                add_node(c, w);
                continue;
            }
            add_node(c - half * xs[i], w);
            add_node(c + half * xs[i], w);
        }
    }
    for (auto &v : acc)
        v /= width;
    return acc;
}
} // namespace detail

/// Extended Jakes correlation [Theta]_kl = (1/(phi_max - phi_min)) * int exp(i 2 pi s (k-l) cos x) dx,
/// where s is the antenna spacing in wavelengths. Theta is Hermitian Toeplitz with unit diagonal.
/// Throws numeric_error when the quadrature cannot certify `tolerance` on the highest-frequency entry.
inline CMatrix jakes_correlation(Index n_rx, double spacing, const JakesInterval &iv, double tolerance = 1e-10)
{
    constexpr double pi = std::numbers::pi;
    if (n_rx < 1)
        throw domain_error("jakes: N must be positive");
    if (!(iv.phi_min >= -pi && iv.phi_min <= 0 && iv.phi_max >= 0 && iv.phi_max <= pi))
        throw domain_error("jakes: require -pi <= phi_min <= 0 <= phi_max <= pi");
    if (!(iv.phi_max > iv.phi_min))
        throw domain_error("jakes: empty angular interval");
    if (!std::isfinite(spacing))
        throw domain_error("jakes: antenna spacing must be finite");
    if (!(tolerance > 0))
        throw domain_error("jakes: quadrature tolerance must be positive");

    const double a1 = 2 * pi * spacing;
    const double width = iv.phi_max - iv.phi_min;
    const double max_phase = std::abs(a1) * static_cast<double>(n_rx - 1) * width;
    // a phase excursion of at most 18 rad per panel keeps the 30-point rule far below 1e-16
    long panels = std::max(1L, static_cast<long>(std::ceil(max_phase / 18.0)));

    std::vector<cdouble> theta;
    double residual = 0;
    constexpr int max_refinements = 6;
    for (int attempt = 0;; ++attempt)
    {
        theta = detail::jakes_offsets(n_rx, a1, iv.phi_min, iv.phi_max, panels);
        if (n_rx == 1)
            break;
        const auto check = detail::jakes_offsets(n_rx, a1, iv.phi_min, iv.phi_max, 2 * panels);
        residual = std::abs(check.back() - theta.back());
        if (residual <= tolerance)
            break;
        if (attempt == max_refinements)
            throw numeric_error("jakes: quadrature did not reach tolerance", residual);
        panels *= 2;
    }

    CMatrix out(n_rx, n_rx);
    for (Index k = 0; k < n_rx; ++k)
    {
        out(k, k) = cdouble(1, 0);
        for (Index l = 0; l < k; ++l)
        {
            out(k, l) = theta[static_cast<std::size_t>(k - l)];
            out(l, k) = std::conj(out(k, l));
        }
    }
    return out;
}

/// Extended Jakes profile: R_j = Theta_j^(1/2) with one interval per transmitter.
/// The Gram cache holds Theta_j itself.
inline CorrelationProfile make_jakes_profile(Index n_rx, double spacing, std::span<const JakesInterval> intervals,
                                             double quadrature_tolerance = 1e-10)
{
    if (intervals.empty())
        throw domain_error("jakes: at least one transmitter is required");
    std::vector<CMatrix> factors, grams;
    std::vector<double> norms;
    factors.reserve(intervals.size());
    grams.reserve(intervals.size());
    for (const auto &iv : intervals)
    {
        CMatrix theta = jakes_correlation(n_rx, spacing, iv, quadrature_tolerance);
        auto root = detail::psd_sqrt_impl(theta, default_psd_clip);
        factors.push_back(std::move(root.root));
        grams.push_back(std::move(theta));
        norms.push_back(root.norm);
    }
    return CorrelationProfile::from_columns(n_rx, std::move(factors), std::move(grams), std::move(norms));
}

inline CorrelationProfile make_jakes_profile(Index n_rx, Index n_tx, double spacing, std::uint64_t seed,
                                             double quadrature_tolerance = 1e-10)
{
    const auto intervals = draw_jakes_intervals(n_tx, seed);
    return make_jakes_profile(n_rx, spacing, intervals, quadrature_tolerance);
}

/// MIMO multiple access channel with M links. Link m has receive correlation Phi_R,m (N x N)
/// and a nonnegative diagonal transmit correlation Phi_T,m (K_m x K_m). Column j of link m,
/// local index i, gets R_j = Phi_R,m^(1/2) * sqrt([Phi_T,m]_ii).
inline CorrelationProfile make_mimo_mac_profile(std::span<const CMatrix> rx_correlations,
                                                std::span<const RMatrix> tx_correlations)
{
    if (rx_correlations.empty())
        throw domain_error("mimo mac: at least one link is required");
    if (rx_correlations.size() != tx_correlations.size())
        throw domain_error("mimo mac: one transmit correlation per link is required");
    const Index n = rx_correlations.front().rows();

    std::vector<CMatrix> factors, grams;
    std::vector<double> norms, scales;
    std::vector<Index> assignment;
    for (std::size_t m = 0; m < rx_correlations.size(); ++m)
    {
        const CMatrix &phi_r = rx_correlations[m];
        const RMatrix &phi_t = tx_correlations[m];
        if (phi_r.rows() != n || phi_r.cols() != n)
            throw domain_error("mimo mac: receive correlations must all be N x N");
        if (phi_t.rows() != phi_t.cols() || phi_t.rows() < 1)
            throw domain_error("mimo mac: transmit correlation must be square and nonempty");
        RMatrix off = phi_t;
        off.diagonal().setZero();
        if (off.cwiseAbs().maxCoeff() != 0.0)
            throw domain_error("mimo mac: transmit correlation must be diagonal");
        if ((phi_t.diagonal().array() < 0).any())
            throw domain_error("mimo mac: transmit correlation must be nonnegative");

        auto root = detail::psd_sqrt_impl(phi_r, default_psd_clip);
        CMatrix g = phi_r;
        symmetrize(g);
        factors.push_back(std::move(root.root));
        grams.push_back(std::move(g));
        norms.push_back(root.norm);
        for (Index i = 0; i < phi_t.rows(); ++i)
        {
            assignment.push_back(static_cast<Index>(m));
            scales.push_back(std::sqrt(phi_t(i, i)));
        }
    }
    const auto k = static_cast<Index>(assignment.size());
    return CorrelationProfile(n, k, std::move(factors), std::move(assignment), std::move(scales), std::move(grams),
                              std::move(norms));
}

// ----- Channel realizations ----------------------------------------------

/// Entry law of w_j. Both are zero-mean, unit-variance, with finite eighth moment.
/// `uniform` draws real and imaginary parts from U[-sqrt(3/2), sqrt(3/2)].
enum class EntryLaw
{
    gaussian,
    uniform
};

inline std::string to_string(EntryLaw law)
{
    return law == EntryLaw::gaussian ? "gaussian" : "uniform";
}

inline EntryLaw entry_law_from_string(const std::string &s)
{
    if (s == "gaussian")
        return EntryLaw::gaussian;
    if (s == "uniform")
        return EntryLaw::uniform;
    throw domain_error("unknown entry law '" + s + "'");
}

struct ChannelRealization
{
    CMatrix h;                   // N x K
    std::optional<CMatrix> gram; // HH^H once computed
    std::uint64_t seed = 0;
    EntryLaw law = EntryLaw::gaussian;

    Index n_rx() const noexcept { return h.rows(); }
    Index n_tx() const noexcept { return h.cols(); }
};

/// Draws w with i.i.d. entries of the given law. Column-major draw order, real part first.
inline CMatrix draw_entries(Index rows, Index cols, Rng &rng, EntryLaw law)
{
    CMatrix w(rows, cols);
    if (law == EntryLaw::gaussian)
    {
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
            {
                const double re = nd(rng);
                w(i, j) = cdouble(re, nd(rng));
            }
    }
    else
    {
        const double a = std::sqrt(1.5);
        std::uniform_real_distribution<double> ud(-a, a);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
            {
                const double re = ud(rng);
                w(i, j) = cdouble(re, ud(rng));
            }
    }
    return w;
}

/// H with columns h_j = R_j w_j / sqrt(K). Deterministic given `seed`.
inline ChannelRealization draw_channel(const CorrelationProfile &profile, std::uint64_t seed,
                                       EntryLaw law = EntryLaw::gaussian)
{
    const Index n = profile.n_rx(), k = profile.n_tx();
    Rng rng(seed);
    const CMatrix w = draw_entries(n, k, rng, law);

    ChannelRealization ch;
    ch.seed = seed;
    ch.law = law;
    ch.h.resize(n, k);
    const double norm = 1.0 / std::sqrt(static_cast<double>(k));
    for (Index j = 0; j < k; ++j)
    {
        const CMatrix &r = profile.factor(profile.assignment()[static_cast<std::size_t>(j)]);
        ch.h.col(j).noalias() = (norm * profile.scale(j)) * (r * w.col(j));
    }
    return ch;
}

/// B = HH^H, cached on the realization.
inline const CMatrix &gram(ChannelRealization &ch)
{
    if (!ch.gram)
    {
        CMatrix b = ch.h * ch.h.adjoint();
        symmetrize(b);
        ch.gram = std::move(b);
    }
    return *ch.gram;
}

/// K x K Gram H^H H. Shares its nonzero spectrum with B and gives [B^n]_kk = [(H^H H)^n]_kk.
inline CMatrix user_gram(const ChannelRealization &ch)
{
    CMatrix g = ch.h.adjoint() * ch.h;
    symmetrize(g);
    return g;
}

} // namespace polymud
