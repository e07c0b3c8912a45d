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

// Acceptance suite: one function per criterion, each returning a pass/fail verdict with a
// short numeric summary. Used by the `validate` subcommand and the acceptance test binary.

#pragma once

#include "experiment.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace polymud
{

struct CriterionResult
{
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0;
};

struct ValidationOptions
{
    double perturbation = 0.0; // injected into the moment recursion to demonstrate sensitivity
    std::uint64_t seed = 1;
    int threads = 1;
    long sweep_trials = 1000;
};

namespace detail
{
class Stopwatch
{
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double x, int precision = 3)
{
    std::ostringstream s;
    s << std::setprecision(precision) << x;
    return s.str();
}

/// Jakes profile with three distinct correlation matrices shared round-robin by the users.
/// The angular intervals depend only on the seed, so doubling N keeps the same spreads.
inline CorrelationProfile shared_jakes_profile(Index n_rx, Index n_tx, std::uint64_t seed)
{
    const auto intervals = draw_jakes_intervals(3, derive_seed(seed, streams::profile));
    std::vector<CMatrix> rx;
    std::vector<RMatrix> tx;
    for (Index m = 0; m < 3; ++m)
    {
        rx.push_back(jakes_correlation(n_rx, 2.0, intervals[static_cast<std::size_t>(m)]));
        const Index km = n_tx / 3 + (m < n_tx % 3 ? 1 : 0);
        tx.push_back(RMatrix::Identity(km, km));
    }
    return make_mimo_mac_profile(rx, tx);
}

struct ConvergenceData
{
    RVector global_median;  // n = 0 .. n_max
    RVector user_median;    // n = 0 .. n_max
    double seconds = 0;
};

/// Medians over draws of the relative deviation of empirical from deterministic moments,
/// globally and for a fixed sample of users.
inline ConvergenceData convergence_data(Index n_rx, Index n_tx, int n_max, long draws, long users,
                                        const ValidationOptions &opt)
{
    Stopwatch clock;
    const auto profile = shared_jakes_profile(n_rx, n_tx, opt.seed);
    const auto st = compute_recursion(profile, n_max, RecursionOptions{opt.perturbation});
    const RVector mu_bar = global_moments(st).global;
    const RMatrix user_bar = per_user_moments(st, n_max);

    std::vector<Index> sampled;
    for (long i = 0; i < users; ++i)
        sampled.push_back(static_cast<Index>(i * n_tx / users));

    std::vector<std::vector<double>> g(static_cast<std::size_t>(n_max) + 1), u(g.size());
    for (long t = 0; t < draws; ++t)
    {
        const auto ch = draw_channel(profile, derive_seed(opt.seed, streams::channel, static_cast<std::uint64_t>(t)));
        const RMatrix all = empirical_user_moments_all(user_gram(ch), n_max);
        const RVector mu = all.colwise().sum().transpose() / static_cast<double>(n_rx);
        for (int n = 0; n <= n_max; ++n)
        {
            const auto ni = static_cast<std::size_t>(n);
            g[ni].push_back(n == 0 ? 0.0 : relative_error(mu(n), mu_bar(n)));
            for (Index k : sampled)
                u[ni].push_back(relative_error(all(k, n), user_bar(k, n)));
        }
    }
    ConvergenceData d;
    d.global_median.resize(n_max + 1);
    d.user_median.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n)
    {
        d.global_median(n) = median(g[static_cast<std::size_t>(n)]);
        d.user_median(n) = median(u[static_cast<std::size_t>(n)]);
    }
    d.seconds = clock.seconds();
    return d;
}

inline CriterionResult finish(int id, std::string name, bool passed, std::string detail, const Stopwatch &clock)
{
    return CriterionResult{id, std::move(name), passed, std::move(detail), clock.seconds()};
}
} // namespace detail

/// 1. Identity correlation reproduces the Marchenko-Pastur moments.
inline CriterionResult validate_mp_moments(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    double worst = 0;
    for (auto [n, k] : {std::pair<Index, Index>{20, 80}, {40, 80}, {40, 40}, {80, 40}})
    {
        const auto st = compute_recursion(make_identity_profile(n, k), 8, RecursionOptions{opt.perturbation});
        const RVector mu = global_moments(st).global;
        const double c = static_cast<double>(n) / static_cast<double>(k);
        for (int i = 0; i <= 8; ++i)
            worst = std::max(worst, detail::relative_error(mu(i), oracle::mp_moment(c, i)));
    }
    const double secs = clock.seconds();
    return detail::finish(1, "Marchenko-Pastur moments", worst <= 1e-9 && secs < 1.0,
                          "max rel err " + detail::fmt(worst) + " (limit 1e-9), " + detail::fmt(secs) + " s (limit 1 s)",
                          clock);
}

/// 2. Scaled recursion against the literal factorial recursion on random PSD profiles.
inline CriterionResult validate_scaled_recursion(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    Rng rng(derive_seed(opt.seed, streams::profile, 2));
    std::uniform_int_distribution<int> dim(2, 8), mcount(1, 3), kcount(1, 12);
    std::uniform_real_distribution<double> scale(0.25, 2.0);
    double worst = 0;
    const int n_max = 6;
    for (int trial = 0; trial < 20; ++trial)
    {
        const Index n = dim(rng), m = mcount(rng), k = kcount(rng);
        std::vector<CMatrix> factors;
        for (Index i = 0; i < m; ++i)
            factors.push_back(draw_entries(n, n, rng, EntryLaw::gaussian) / std::sqrt(static_cast<double>(n)));
        std::uniform_int_distribution<Index> pick(0, m - 1);
        std::vector<Index> assignment;
        std::vector<double> scales;
        for (Index j = 0; j < k; ++j)
        {
            assignment.push_back(pick(rng));
            scales.push_back(scale(rng));
        }
        const CorrelationProfile p(n, k, factors, assignment, scales);
        const auto st = compute_recursion(p, n_max, RecursionOptions{opt.perturbation});
        const RVector mu = global_moments(st).global;
        const RMatrix user = per_user_moments(st, n_max);
        const auto ref = oracle::naive_recursion(p, n_max);
        for (int i = 0; i <= n_max; ++i)
        {
            worst = std::max(worst, detail::relative_error(mu(i), ref.mu[static_cast<std::size_t>(i)]));
            for (Index j = 0; j < k; ++j)
                worst = std::max(worst, detail::relative_error(st.delta_hat(st.class_of[static_cast<std::size_t>(j)], i),
                                                               ref.delta_hat(j, i)));
        }
        // Per-user moments from the naive delta values.
        for (Index j = 0; j < k; ++j)
        {
            RVector mk = RVector::Zero(n_max + 1);
            mk(0) = 1;
            for (int q = 1; q <= n_max; ++q)
                for (int i = 0; i < q; ++i)
                    mk(q) += mk(q - 1 - i) * ref.delta_hat(j, i);
            for (int q = 0; q <= n_max; ++q)
                worst = std::max(worst, detail::relative_error(user(j, q), mk(q)));
        }
    }
    return detail::finish(2, "scaled vs literal recursion", worst <= 1e-12,
                          "20 profiles, max rel err " + detail::fmt(worst) + " (limit 1e-12)", clock);
}

/// 3 and 4. Convergence of global and per-user moments on a fixed Jakes profile.
inline std::pair<CriterionResult, CriterionResult> validate_convergence(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    const int n_max = 6;
    const auto small = detail::convergence_data(256, 102, n_max, 20, 10, opt);
    const auto large = detail::convergence_data(512, 204, n_max, 20, 10, opt);
    const double secs = clock.seconds();

    bool within = true, decreasing = true;
    std::ostringstream s;
    s << "medians at 256x102 / 512x204:";
    for (int n = 1; n <= n_max; ++n)
    {
        within = within && small.global_median(n) <= 0.05;
        decreasing = decreasing && large.global_median(n) < small.global_median(n);
        s << " n" << n << "=" << detail::fmt(small.global_median(n), 2) << "/" << detail::fmt(large.global_median(n), 2);
    }
    s << "; limit 0.05 at 256x102, " << (decreasing ? "decreasing" : "NOT decreasing") << ", " << detail::fmt(secs)
      << " s (limit 120 s)";
    CriterionResult c3{3, "global moment convergence", within && decreasing && secs < 120.0, s.str(), secs};

    bool user_ok = true;
    std::ostringstream u;
    u << "per-user medians at 256x102:";
    for (int n = 1; n <= 4; ++n)
    {
        user_ok = user_ok && small.user_median(n) <= 0.10;
        u << " n" << n << "=" << detail::fmt(small.user_median(n), 2);
    }
    u << "; limit 0.10";
    CriterionResult c4{4, "per-user moment convergence", user_ok, u.str(), small.seconds};
    return {c3, c4};
}

/// 5. Closed-form SINR against Monte Carlo symbol simulation.
inline CriterionResult validate_sinr_formula(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    const auto profile = make_identity_profile(8, 4);
    const double sigma2 = 0.1;
    double worst = 0;
    for (std::uint64_t r = 0; r < 5; ++r)
    {
        const auto ch = draw_channel(profile, derive_seed(opt.seed, streams::channel, 500 + r));
        const auto emp = empirical_moments(ch, 6);
        for (int l = 1; l <= 3; ++l)
        {
            const auto w = optimal_weights(emp, sigma2, l);
            CVector gains(4);
            for (Index k = 0; k < 4; ++k)
            {
                const RVector m = empirical_user_moments(ch, k, l);
                gains(k) = w.coefficients.dot(m.tail(l));
            }
            const RVector mc = monte_carlo_sinr(
                ch, sigma2, [&](const CMatrix &y) { return poly_detect_batch(ch, y, w); }, gains, 1000000,
                derive_seed(opt.seed, streams::symbols, 10 * r + static_cast<std::uint64_t>(l)));
            for (Index k = 0; k < 4; ++k)
                worst = std::max(worst, detail::relative_error(mc(k), sinr_exact(ch, w, k).gamma));
        }
    }
    return detail::finish(5, "SINR formula vs Monte Carlo", worst <= 0.01,
                          "5 realizations, L=1..3, 1e6 samples, max rel dev " + detail::fmt(worst) + " (limit 0.01)",
                          clock);
}

/// 6. Full-rank polynomial detector with empirical moments equals LMMSE.
inline CriterionResult validate_lmmse_equivalence(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    const double sigma2 = 1.0;
    double worst = 0, worst_cond = 0;
    std::uint64_t idx = 0;
    for (auto [n, k] : {std::pair<Index, Index>{6, 6}, {6, 4}, {4, 6}, {5, 5}, {3, 6}, {6, 2}, {2, 2}})
    {
        const auto profile = make_identity_profile(n, k);
        for (int r = 0; r < 5; ++r, ++idx)
        {
            const auto ch = draw_channel(profile, derive_seed(opt.seed, streams::channel, 600 + idx));
            const int l = static_cast<int>(std::min(n, k));
            const auto w = optimal_weights(empirical_moments(ch, 2 * l), sigma2, l);
            Rng rng(derive_seed(opt.seed, streams::symbols, 600 + idx));
            const CMatrix y = draw_entries(n, 16, rng, EntryLaw::gaussian);
            const CMatrix a = poly_detect_batch(ch, y, w), b = lmmse_detect_batch(ch, y, sigma2);
            worst = std::max(worst, (a - b).norm() / b.norm());
            worst_cond = std::max(worst_cond, w.condition_estimate);
        }
    }
    return detail::finish(6, "full-rank polynomial equals LMMSE", worst <= 1e-6,
                          "35 instances with N,K <= 6, max rel diff " + detail::fmt(worst) +
                              " (limit 1e-6), worst cond " + detail::fmt(worst_cond, 2),
                          clock);
}

/// 7. Fixed-point residual on the SNR grid and Stieltjes transform against simulation.
inline CriterionResult validate_fixed_point(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    const ExperimentConfig base;
    ExperimentConfig cfg;
    cfg.seed = opt.seed;
    const auto profile = make_profile(cfg);
    double worst_res = 0;
    for (double snr : base.snr_db)
        worst_res = std::max(worst_res, solve_fixed_point(profile, -detail::sigma2_from_db(snr)).residual);

    const Index n = 256, k = 102;
    const auto shared = detail::shared_jakes_profile(n, k, opt.seed);
    const long draws = 20;
    std::vector<RVector> eig;
    for (long t = 0; t < draws; ++t)
    {
        const auto ch = draw_channel(shared, derive_seed(opt.seed, streams::channel, static_cast<std::uint64_t>(t)));
        eig.push_back(Eigen::SelfAdjointEigenSolver<CMatrix>(user_gram(ch), Eigen::EigenvaluesOnly).eigenvalues());
    }
    double worst_m = 0;
    for (double snr : base.snr_db)
    {
        const double s2 = detail::sigma2_from_db(snr);
        double mc = 0;
        for (const auto &e : eig)
            mc += ((e.array() + s2).inverse().sum() + static_cast<double>(n - k) / s2) / static_cast<double>(n);
        mc /= static_cast<double>(draws);
        worst_m = std::max(worst_m, detail::relative_error(stieltjes_m(solve_fixed_point(shared, -s2)), mc));
    }
    return detail::finish(7, "fixed point and Stieltjes transform", worst_res <= 1e-10 && worst_m <= 0.02,
                          "max residual " + detail::fmt(worst_res) + " (limit 1e-10), max rel dev of m " +
                              detail::fmt(worst_m) + " at 256x102 (limit 0.02)",
                          clock);
}

/// 8. Qualitative shape of the SINR and BER curves for the N=100, K=40 Jakes scenario.
inline CriterionResult validate_figure_shape(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    ExperimentConfig cfg;
    cfg.seed = opt.seed;
    cfg.trials = opt.sweep_trials;
    cfg.threads = opt.threads;
    cfg.include_asymptotic = false;
    const auto rows = run_sweep(cfg, make_profile(cfg));
    const int full = static_cast<int>(std::min(cfg.n_rx, cfg.n_tx));
    auto row = [&](double snr, const std::string &m, int l) -> const ResultRow & {
        const auto *r = find_row(rows, snr, m, l);
        if (!r)
            throw numeric_error("figure check: missing sweep row", 0.0);
        return *r;
    };

    bool order = true, close = true, spread = true;
    double worst_gap_db = 0;
    for (double snr : cfg.snr_db)
    {
        const double mf = row(snr, "matched", 1).gamma_mean, p2 = row(snr, "poly", 2).gamma_mean,
                     p3 = row(snr, "poly", 3).gamma_mean, p6 = row(snr, "poly", 6).gamma_mean,
                     lm = row(snr, "lmmse", full).gamma_mean;
        // LMMSE is optimal per realization, so poly(6) can exceed it only by rounding.
        order = order && mf < p2 && p2 < p3 && p3 < p6 && p6 <= lm * (1 + 1e-12);
        if (snr <= 10)
        {
            const double gap = 10 * std::log10(lm / p6);
            worst_gap_db = std::max(worst_gap_db, gap);
            close = close && gap <= 1.0;
        }
        const double s1 = row(snr, "matched", 1).gamma_std, s2 = row(snr, "poly", 2).gamma_std,
                     s3 = row(snr, "poly", 3).gamma_std, s6 = row(snr, "poly", 6).gamma_std;
        spread = spread && s1 <= s2 && s2 <= s3 && s3 <= s6;
    }
    const double hi = cfg.snr_db.back(), prev = cfg.snr_db[cfg.snr_db.size() - 2];
    bool floors = true;
    for (int l : cfg.l_values)
        floors = floors && row(prev, "poly", l).ber < 2 * row(hi, "poly", l).ber;
    const bool lmmse_drops = row(hi, "lmmse", full).ber * 2 < row(prev, "lmmse", full).ber;

    std::ostringstream s;
    s << "(a) ordering " << (order ? "ok" : "FAILED") << ", (b) worst gap " << detail::fmt(worst_gap_db)
      << " dB (limit 1), (c) std nondecreasing " << (spread ? "ok" : "FAILED") << ", (d) poly BER "
      << (floors ? "floors" : "does NOT floor") << " and LMMSE BER " << (lmmse_drops ? "drops" : "does NOT drop")
      << " from " << prev << " to " << hi << " dB; " << cfg.trials << " trials";
    const double secs = clock.seconds();
    return detail::finish(8, "SINR/BER curve shape", order && close && spread && floors && lmmse_drops && secs < 600,
                          s.str() + ", " + detail::fmt(secs) + " s (limit 600 s)", clock);
}

/// 9. Repeated runs, and runs with different thread counts, give byte-identical CSV.
inline CriterionResult validate_determinism(const ValidationOptions &opt = {})
{
    detail::Stopwatch clock;
    ExperimentConfig cfg;
    cfg.scenario.type = "identity-mp";
    cfg.n_rx = 64;
    cfg.n_tx = 64;
    cfg.l_values = {2};
    cfg.snr_db = {10};
    cfg.trials = 50;
    cfg.seed = opt.seed;
    cfg.threads = 1;
    const std::string a = results_csv(run_sinr_sweep(cfg));
    const std::string b = results_csv(run_sinr_sweep(cfg));
    cfg.threads = 3;
    const std::string c = results_csv(run_sinr_sweep(cfg));

    ExperimentConfig jc;
    jc.n_rx = 32;
    jc.n_tx = 12;
    jc.trials = 20;
    jc.seed = opt.seed;
    jc.sinr_eval = SinrEval::monte_carlo;
    jc.mc_symbols = 200;
    jc.snr_db = {0, 10};
    const std::string d = results_csv(run_sinr_sweep(jc));
    jc.threads = 2;
    const std::string e = results_csv(run_sinr_sweep(jc));

    std::ostringstream m1, m2;
    write_moment_report_csv(m1, run_moment_report(jc, 4));
    jc.threads = 1;
    write_moment_report_csv(m2, run_moment_report(jc, 4));

    const bool ok = a == b && a == c && d == e && m1.str() == m2.str();
    return detail::finish(9, "byte-identical reruns", ok,
                          ok ? "sweep and moment CSVs identical across reruns and thread counts"
                             : "CSV output differs between runs",
                          clock);
}

/// Runs the selected criteria (all when `ids` is empty) and reports each through `sink` as it completes.
inline std::vector<CriterionResult> run_validation(const ValidationOptions &opt, const std::vector<int> &ids = {},
                                                   const std::function<void(const CriterionResult &)> &sink = {})
{
    auto wanted = [&](int id) { return ids.empty() || std::find(ids.begin(), ids.end(), id) != ids.end(); };
    std::vector<CriterionResult> out;
    auto emit = [&](CriterionResult r) {
        if (sink)
            sink(r);
        out.push_back(std::move(r));
    };
    auto guarded = [&](int id, const std::string &name, const std::function<void()> &body) {
        try
        {
            body();
        }
        catch (const std::exception &e)
        {
            emit(CriterionResult{id, name, false, std::string("exception: ") + e.what(), 0});
        }
    };
    if (wanted(1))
        guarded(1, "Marchenko-Pastur moments", [&] { emit(validate_mp_moments(opt)); });
    if (wanted(2))
        guarded(2, "scaled vs literal recursion", [&] { emit(validate_scaled_recursion(opt)); });
    if (wanted(3) || wanted(4))
        guarded(3, "moment convergence", [&] {
            auto [c3, c4] = validate_convergence(opt);
            if (wanted(3))
                emit(c3);
            if (wanted(4))
                emit(c4);
        });
    if (wanted(5))
        guarded(5, "SINR formula vs Monte Carlo", [&] { emit(validate_sinr_formula(opt)); });
    if (wanted(6))
        guarded(6, "full-rank polynomial equals LMMSE", [&] { emit(validate_lmmse_equivalence(opt)); });
    if (wanted(7))
        guarded(7, "fixed point and Stieltjes transform", [&] { emit(validate_fixed_point(opt)); });
    if (wanted(8))
        guarded(8, "SINR/BER curve shape", [&] { emit(validate_figure_shape(opt)); });
    if (wanted(9))
        guarded(9, "byte-identical reruns", [&] { emit(validate_determinism(opt)); });
    return out;
}

inline std::string format_result(const CriterionResult &r)
{
    std::ostringstream s;
    s << "[" << (r.passed ? "PASS" : "FAIL") << "] criterion " << r.id << ": " << r.name << " - " << r.detail;
    return s.str();
}

} // namespace polymud
