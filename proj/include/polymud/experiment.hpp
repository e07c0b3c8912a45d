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

// Reproducible Monte Carlo experiments: SINR/BER sweeps over SNR and filter rank, and
// moment convergence reports.
//
// Seeding: the correlation profile is drawn once from stream `profile` of the master seed
// and kept fixed for the whole run. Trial t draws its channel from seed
// derive_seed(master, channel, t), so results do not depend on the number of workers.
// Per-trial partial sums are reduced in trial order.

#pragma once

#include "channel_models.hpp"
#include "detectors.hpp"
#include "fixed_point.hpp"
#include "moment_engine.hpp"
#include "profile_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace polymud
{

enum class SinrEval
{
    exact_formula,
    asymptotic,
    monte_carlo
};

inline std::string to_string(SinrEval e)
{
    switch (e)
    {
    case SinrEval::exact_formula: return "exact-formula";
    case SinrEval::asymptotic: return "asymptotic";
    case SinrEval::monte_carlo: return "monte-carlo";
    }
    return "unknown";
}

struct ScenarioConfig
{
    std::string type = "jakes"; // jakes | distributed-antenna | mimo-mac | identity-mp
    double antenna_spacing = 2.0;
    double quadrature_tolerance = 1e-10;
    // distributed-antenna: receive antennas and transmitters uniform in the unit square
    double pathloss_exponent = 3.0;
    double min_distance = 0.1;
    std::vector<double> powers; // empty: all 1
    // mimo-mac: `groups` links with Jakes receive correlation, transmit gains per column
    int groups = 4;
    std::vector<double> tx_gains; // empty: all 1
    std::string profile_file;     // overrides the generated profile when set
};

struct ExperimentConfig
{
    ScenarioConfig scenario;
    Index n_rx = 100;
    Index n_tx = 40;
    std::vector<int> l_values{2, 3, 6};
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20, 25};
    long trials = 1000;
    std::uint64_t seed = 1;
    Provenance weight_source = Provenance::asymptotic;
    SinrEval sinr_eval = SinrEval::exact_formula;
    EntryLaw law = EntryLaw::gaussian;
    long user = -1;               // -1 pools all users
    bool include_asymptotic = true;
    long mc_symbols = 2000;       // per trial, monte-carlo evaluation only
    int threads = 1;
    int moment_order = 6;         // moments subcommand
    long sampled_users = 10;      // moments subcommand
    std::string outputs = "out";
};

// ----- Configuration -------------------------------------------------------

inline void validate(const ExperimentConfig &c)
{
    if (c.n_rx < 1 || c.n_tx < 1)
        throw config_error("N and K must be at least 1");
    if (c.trials < 1)
        throw config_error("trials must be at least 1");
    if (c.l_values.empty())
        throw config_error("L_values must not be empty");
    for (int l : c.l_values)
        if (l < 1 || l > std::min(c.n_rx, c.n_tx))
            throw config_error("every L must lie in [1, min(N, K)], got " + std::to_string(l));
    if (c.snr_db.empty())
        throw config_error("snr grid must not be empty");
    for (double s : c.snr_db)
        if (!std::isfinite(s))
            throw config_error("snr grid must be finite");
    if (c.user < -1 || c.user >= c.n_tx)
        throw config_error("user must be -1 (all) or a valid user index");
    if (c.threads < 1)
        throw config_error("threads must be at least 1");
    if (c.moment_order < 0)
        throw config_error("moment_order must be nonnegative");
    if (c.mc_symbols < 1)
        throw config_error("mc_symbols must be at least 1");
    if (c.sampled_users < 1)
        throw config_error("sampled_users must be at least 1");
    const auto &s = c.scenario;
    if (s.type != "jakes" && s.type != "distributed-antenna" && s.type != "mimo-mac" && s.type != "identity-mp")
        throw config_error("unknown scenario '" + s.type + "'");
    if (s.type == "mimo-mac" && (s.groups < 1 || s.groups > c.n_tx))
        throw config_error("mimo-mac groups must lie in [1, K]");
    if (!s.powers.empty() && static_cast<Index>(s.powers.size()) != c.n_tx)
        throw config_error("scenario.powers must have K entries");
    if (!s.tx_gains.empty() && static_cast<Index>(s.tx_gains.size()) != c.n_tx)
        throw config_error("scenario.tx_gains must have K entries");
}

inline nlohmann::json config_to_json(const ExperimentConfig &c)
{
    nlohmann::json s;
    s["type"] = c.scenario.type;
    s["antenna_spacing"] = c.scenario.antenna_spacing;
    s["quadrature_tolerance"] = c.scenario.quadrature_tolerance;
    s["pathloss_exponent"] = c.scenario.pathloss_exponent;
    s["min_distance"] = c.scenario.min_distance;
    s["powers"] = c.scenario.powers;
    s["groups"] = c.scenario.groups;
    s["tx_gains"] = c.scenario.tx_gains;
    s["profile_file"] = c.scenario.profile_file;

    nlohmann::json j;
    j["scenario"] = std::move(s);
    j["N"] = c.n_rx;
    j["K"] = c.n_tx;
    j["L_values"] = c.l_values;
    j["snr_grid_db"] = c.snr_db;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["weight_source"] = to_string(c.weight_source);
    j["sinr_eval"] = to_string(c.sinr_eval);
    j["entry_law"] = to_string(c.law);
    j["user"] = c.user;
    j["include_asymptotic"] = c.include_asymptotic;
    j["mc_symbols"] = c.mc_symbols;
    j["threads"] = c.threads;
    j["moment_order"] = c.moment_order;
    j["sampled_users"] = c.sampled_users;
    j["outputs"] = c.outputs;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json &j)
{
    ExperimentConfig c;
    try
    {
        if (!j.is_object())
            throw config_error("config must be a JSON object");
        static const char *known[] = {"scenario", "N", "K", "L_values", "snr_grid_db", "trials", "seed", "weight_source",
                                      "sinr_eval", "entry_law", "user", "include_asymptotic", "mc_symbols",
                                      "threads", "moment_order", "sampled_users", "outputs"};
        for (const auto &item : j.items())
            if (std::find_if(std::begin(known), std::end(known), [&](const char *k) { return item.key() == k; }) ==
                std::end(known))
                throw config_error("unknown config key '" + item.key() + "'");

        if (j.contains("scenario"))
        {
            const auto &s = j.at("scenario");
            if (s.is_string())
                c.scenario.type = s.get<std::string>();
            else
            {
                static const char *scenario_keys[] = {"type", "antenna_spacing", "quadrature_tolerance",
                                                      "pathloss_exponent", "min_distance", "powers", "groups",
                                                      "tx_gains", "profile_file"};
                for (const auto &item : s.items())
                    if (std::find_if(std::begin(scenario_keys), std::end(scenario_keys),
                                     [&](const char *k) { return item.key() == k; }) == std::end(scenario_keys))
                        throw config_error("unknown scenario key '" + item.key() + "'");
                c.scenario.type = s.value("type", c.scenario.type);
                c.scenario.antenna_spacing = s.value("antenna_spacing", c.scenario.antenna_spacing);
                c.scenario.quadrature_tolerance = s.value("quadrature_tolerance", c.scenario.quadrature_tolerance);
                c.scenario.pathloss_exponent = s.value("pathloss_exponent", c.scenario.pathloss_exponent);
                c.scenario.min_distance = s.value("min_distance", c.scenario.min_distance);
                c.scenario.powers = s.value("powers", c.scenario.powers);
                c.scenario.groups = s.value("groups", c.scenario.groups);
                c.scenario.tx_gains = s.value("tx_gains", c.scenario.tx_gains);
                c.scenario.profile_file = s.value("profile_file", c.scenario.profile_file);
            }
        }
        c.n_rx = j.value("N", c.n_rx);
        c.n_tx = j.value("K", c.n_tx);
        c.l_values = j.value("L_values", c.l_values);
        c.snr_db = j.value("snr_grid_db", c.snr_db);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        const auto ws = j.value("weight_source", to_string(c.weight_source));
        if (ws == "empirical")
            c.weight_source = Provenance::empirical;
        else if (ws == "asymptotic")
            c.weight_source = Provenance::asymptotic;
        else
            throw config_error("weight_source must be 'empirical' or 'asymptotic'");
        const auto ev = j.value("sinr_eval", to_string(c.sinr_eval));
        if (ev == "exact-formula")
            c.sinr_eval = SinrEval::exact_formula;
        else if (ev == "asymptotic")
            c.sinr_eval = SinrEval::asymptotic;
        else if (ev == "monte-carlo")
            c.sinr_eval = SinrEval::monte_carlo;
        else
            throw config_error("sinr_eval must be 'exact-formula', 'asymptotic' or 'monte-carlo'");
        try
        {
            c.law = entry_law_from_string(j.value("entry_law", to_string(c.law)));
        }
        catch (const domain_error &e)
        {
            throw config_error(e.what());
        }
        c.user = j.value("user", c.user);
        c.include_asymptotic = j.value("include_asymptotic", c.include_asymptotic);
        c.mc_symbols = j.value("mc_symbols", c.mc_symbols);
        c.threads = j.value("threads", c.threads);
        c.moment_order = j.value("moment_order", c.moment_order);
        c.sampled_users = j.value("sampled_users", c.sampled_users);
        c.outputs = j.value("outputs", c.outputs);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw config_error(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw config_error("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical JSON dump; stored with every output for attribution.
inline std::string config_hash(const ExperimentConfig &c)
{
    const std::string s = config_to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s)
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ----- Profiles ------------------------------------------------------------

inline CorrelationProfile make_profile(const ExperimentConfig &c)
{
    const auto &s = c.scenario;
    if (!s.profile_file.empty())
    {
        auto p = load_profile(s.profile_file);
        if (p.n_rx() != c.n_rx || p.n_tx() != c.n_tx)
            throw config_error("profile file dimensions do not match N and K");
        return p;
    }

    const std::uint64_t pseed = derive_seed(c.seed, streams::profile);
    if (s.type == "identity-mp")
        return make_identity_profile(c.n_rx, c.n_tx);
    if (s.type == "jakes")
        return make_jakes_profile(c.n_rx, c.n_tx, s.antenna_spacing, pseed, s.quadrature_tolerance);
    if (s.type == "distributed-antenna")
    {
        Rng rng(pseed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        RMatrix rx(c.n_rx, 2), tx(c.n_tx, 2);
        for (Index i = 0; i < c.n_rx; ++i)
            rx.row(i) << u(rng), u(rng);
        for (Index j = 0; j < c.n_tx; ++j)
            tx.row(j) << u(rng), u(rng);
        RMatrix d(c.n_rx, c.n_tx);
        for (Index i = 0; i < c.n_rx; ++i)
            for (Index j = 0; j < c.n_tx; ++j)
                d(i, j) = std::max((rx.row(i) - tx.row(j)).norm(), s.min_distance);
        RVector p = s.powers.empty() ? RVector(RVector::Ones(c.n_tx))
                                     : RVector(Eigen::Map<const RVector>(s.powers.data(), c.n_tx));
        return make_distributed_antenna_profile(d, p, s.pathloss_exponent);
    }
    // mimo-mac
    const auto intervals = draw_jakes_intervals(s.groups, pseed);
    std::vector<CMatrix> rx;
    std::vector<RMatrix> txc;
    Index start = 0;
    for (int m = 0; m < s.groups; ++m)
    {
        const Index km = c.n_tx / s.groups + (m < c.n_tx % s.groups ? 1 : 0);
        rx.push_back(jakes_correlation(c.n_rx, s.antenna_spacing, intervals[static_cast<std::size_t>(m)],
                                       s.quadrature_tolerance));
        RMatrix t = RMatrix::Identity(km, km);
        if (!s.tx_gains.empty())
            for (Index i = 0; i < km; ++i)
                t(i, i) = s.tx_gains[static_cast<std::size_t>(start + i)];
        txc.push_back(std::move(t));
        start += km;
    }
    return make_mimo_mac_profile(rx, txc);
}

// ----- Results -------------------------------------------------------------

struct ResultRow
{
    double snr_db = 0;
    std::string method;
    int rank = 1;   // L (min(N, K) for LMMSE)
    long user = -1; // -1: pooled over all users
    double gamma_mean = 0;
    double gamma_std = 0;
    double ber = 0;
    long trials = 0;
    std::uint64_t seed = 0;
    std::string provenance; // weights/evaluation tags
    long failures = 0;      // samples dropped on numeric errors
};

inline constexpr const char *result_csv_header = "snr_db,method,L,user,gamma_mean,gamma_std,ber,trials,seed";

inline void write_results_csv(std::ostream &out, const std::vector<ResultRow> &rows)
{
    out << result_csv_header << "\r\n";
    std::ostringstream line;
    line << std::setprecision(12);
    for (const auto &r : rows)
    {
        line.str({});
        line << r.snr_db << ',' << r.method << ',' << r.rank << ',';
        if (r.user < 0)
            line << "all";
        else
            line << r.user;
        line << ',' << r.gamma_mean << ',' << r.gamma_std << ',' << r.ber << ',' << r.trials << ',' << r.seed;
        out << line.str() << "\r\n";
    }
}

inline std::string results_csv(const std::vector<ResultRow> &rows)
{
    std::ostringstream s;
    write_results_csv(s, rows);
    return s.str();
}

namespace detail
{
struct Accumulator
{
    double sum = 0, sum_sq = 0, ber = 0;
    long count = 0, failures = 0;

    void add(double g)
    {
        if (!std::isfinite(g) || g < 0)
        {
            ++failures;
            return;
        }
        sum += g;
        sum_sq += g * g;
        ber += ber_bpsk(g);
        ++count;
    }
    void merge(const Accumulator &o)
    {
        sum += o.sum;
        sum_sq += o.sum_sq;
        ber += o.ber;
        count += o.count;
        failures += o.failures;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
    double stddev() const
    {
        if (count < 2)
            return 0.0;
        const double m = mean();
        const double v = (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
        return std::sqrt(std::max(v, 0.0));
    }
};

template <class Fn>
void for_each_trial(long trials, int threads, Fn &&fn)
{
    if (threads <= 1 || trials < 2)
    {
        for (long t = 0; t < trials; ++t)
            fn(t);
        return;
    }
    std::vector<std::thread> pool;
    const long workers = std::min<long>(threads, trials);
    for (long w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (long t = w; t < trials; t += workers)
                fn(t);
        });
    for (auto &th : pool)
        th.join();
}

inline std::vector<Index> selected_users(const ExperimentConfig &c)
{
    std::vector<Index> users;
    if (c.user >= 0)
        users.push_back(c.user);
    else
        for (Index k = 0; k < c.n_tx; ++k)
            users.push_back(k);
    return users;
}

inline double sigma2_from_db(double snr_db)
{
    return std::pow(10.0, -snr_db / 10.0);
}

inline std::string provenance_tag(const ExperimentConfig &c)
{
    return "weights=" + to_string(c.weight_source) + ";sinr=" + to_string(c.sinr_eval) + ";law=" + to_string(c.law);
}
} // namespace detail

/// SINR and BER over the SNR grid for matched filter, poly(L) for every configured L, and LMMSE.
/// Deterministic curves (poly-asymptotic, lmmse-asymptotic) are appended when requested.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig &cfg, const CorrelationProfile &profile)
{
    validate(cfg);
    if (profile.n_rx() != cfg.n_rx || profile.n_tx() != cfg.n_tx)
        throw config_error("profile dimensions do not match N and K");

    const int l_max = *std::max_element(cfg.l_values.begin(), cfg.l_values.end());
    const int order = 2 * l_max;
    const auto users = detail::selected_users(cfg);
    const double n = static_cast<double>(cfg.n_rx);
    const std::size_t n_snr = cfg.snr_db.size();
    const std::size_t n_l = cfg.l_values.size();

    const auto state = compute_recursion(profile, order);
    const MomentTable mu_bar = global_moments(state);
    const RMatrix user_bar = per_user_moments(state, order);

    // asymptotic weights, per SNR and rank
    std::vector<std::vector<std::optional<DetectorWeights>>> w_bar(n_snr, std::vector<std::optional<DetectorWeights>>(n_l));
    for (std::size_t s = 0; s < n_snr; ++s)
        for (std::size_t li = 0; li < n_l; ++li)
            try
            {
                w_bar[s][li] = optimal_weights(mu_bar, detail::sigma2_from_db(cfg.snr_db[s]), cfg.l_values[li]);
            }
            catch (const numeric_error &)
            {
                // row reports failures; the run continues
            }

    std::vector<ResultRow> rows;
    auto base_row = [&](double snr, std::string method, int rank) {
        ResultRow r;
        r.snr_db = snr;
        r.method = std::move(method);
        r.rank = rank;
        r.user = cfg.user;
        r.seed = cfg.seed;
        r.provenance = detail::provenance_tag(cfg);
        return r;
    };
    auto finish = [](ResultRow &r, const detail::Accumulator &a, long trials) {
        r.gamma_mean = a.mean();
        r.gamma_std = a.stddev();
        r.ber = a.count ? a.ber / static_cast<double>(a.count) : std::numeric_limits<double>::quiet_NaN();
        r.trials = trials;
        r.failures = a.failures;
    };
    const int full_rank = static_cast<int>(std::min(cfg.n_rx, cfg.n_tx));

    if (cfg.sinr_eval != SinrEval::asymptotic)
    {
        // slots per SNR: matched, poly(L) for each L, lmmse
        const std::size_t per_snr = n_l + 2;
        std::vector<std::vector<detail::Accumulator>> partial(static_cast<std::size_t>(cfg.trials),
                                                              std::vector<detail::Accumulator>(n_snr * per_snr));

        detail::for_each_trial(cfg.trials, cfg.threads, [&](long t) {
            auto &acc = partial[static_cast<std::size_t>(t)];
            const auto ch = draw_channel(profile, derive_seed(cfg.seed, streams::channel, static_cast<std::uint64_t>(t)),
                                         cfg.law);
            const CMatrix g = user_gram(ch);
            const RMatrix um = empirical_user_moments_all(g, order);

            MomentTable mu_emp;
            if (cfg.weight_source == Provenance::empirical)
            {
                mu_emp.provenance = Provenance::empirical;
                mu_emp.global = um.colwise().sum().transpose() / n;
                mu_emp.global(0) = 1.0;
            }

            for (std::size_t s = 0; s < n_snr; ++s)
            {
                const double sigma2 = detail::sigma2_from_db(cfg.snr_db[s]);
                std::vector<std::optional<DetectorWeights>> ws(n_l);
                for (std::size_t li = 0; li < n_l; ++li)
                {
                    if (cfg.weight_source == Provenance::asymptotic)
                        ws[li] = w_bar[s][li];
                    else
                        try
                        {
                            ws[li] = optimal_weights(mu_emp, sigma2, cfg.l_values[li]);
                        }
                        catch (const numeric_error &)
                        {
                        }
                }
                auto *slot = &acc[s * per_snr];
                const auto nan = std::numeric_limits<double>::quiet_NaN();

                if (cfg.sinr_eval == SinrEval::exact_formula)
                {
                    const RVector lm = lmmse_sinr_all(g, sigma2);
                    const RVector one = RVector::Ones(1);
                    for (Index k : users)
                    {
                        const RVector m = um.row(k).transpose();
                        auto eval = [&](const RVector &w) {
                            try
                            {
                                return sinr_from_moments(m, w, sigma2);
                            }
                            catch (const numeric_error &)
                            {
                                return nan;
                            }
                        };
                        slot[0].add(eval(one));
                        for (std::size_t li = 0; li < n_l; ++li)
                            slot[1 + li].add(ws[li] ? eval(ws[li]->coefficients) : nan);
                        slot[per_snr - 1].add(lm(k));
                    }
                }
                else
                {
                    const auto sym_seed = derive_seed(cfg.seed, streams::symbols,
                                                      static_cast<std::uint64_t>(t) * n_snr + s);
                    auto mc = [&](const DetectorWeights &w) {
                        CVector gains(cfg.n_tx);
                        for (Index k = 0; k < cfg.n_tx; ++k)
                        {
                            double acc_g = 0;
                            for (Index l = 0; l < w.coefficients.size(); ++l)
                                acc_g += w.coefficients(l) * um(k, l + 1);
                            gains(k) = acc_g;
                        }
                        return monte_carlo_sinr(
                            ch, sigma2, [&](const CMatrix &y) { return poly_detect_batch(ch, y, w); }, gains,
                            cfg.mc_symbols, sym_seed);
                    };
                    const RVector mf = mc(fixed_weights(RVector::Ones(1), sigma2));
                    std::vector<RVector> poly(n_l);
                    for (std::size_t li = 0; li < n_l; ++li)
                        if (ws[li])
                            poly[li] = mc(*ws[li]);
                    // LMMSE gains from the K x K Gram: diag(G (G + sigma^2 I)^{-1})
                    CMatrix a = g;
                    a.diagonal().array() += sigma2;
                    const CMatrix f = a.llt().solve(g);
                    const CVector lg = f.diagonal();
                    const RVector lm = monte_carlo_sinr(
                        ch, sigma2, [&](const CMatrix &y) { return lmmse_detect_batch(ch, y, sigma2); }, lg,
                        cfg.mc_symbols, sym_seed);
                    for (Index k : users)
                    {
                        slot[0].add(mf(k));
                        for (std::size_t li = 0; li < n_l; ++li)
                            slot[1 + li].add(ws[li] ? poly[li](k) : nan);
                        slot[per_snr - 1].add(lm(k));
                    }
                }
            }
        });

        for (std::size_t s = 0; s < n_snr; ++s)
        {
            std::vector<detail::Accumulator> total(per_snr);
            for (const auto &p : partial)
                for (std::size_t i = 0; i < per_snr; ++i)
                    total[i].merge(p[s * per_snr + i]);
            auto r = base_row(cfg.snr_db[s], "matched", 1);
            finish(r, total[0], cfg.trials);
            rows.push_back(r);
            for (std::size_t li = 0; li < n_l; ++li)
            {
                auto rp = base_row(cfg.snr_db[s], "poly", cfg.l_values[li]);
                finish(rp, total[1 + li], cfg.trials);
                rows.push_back(rp);
            }
            auto rl = base_row(cfg.snr_db[s], "lmmse", full_rank);
            finish(rl, total[per_snr - 1], cfg.trials);
            rows.push_back(rl);
        }
    }

    if (cfg.include_asymptotic || cfg.sinr_eval == SinrEval::asymptotic)
    {
        for (std::size_t s = 0; s < n_snr; ++s)
        {
            const double sigma2 = detail::sigma2_from_db(cfg.snr_db[s]);
            detail::Accumulator mf;
            std::vector<detail::Accumulator> poly(n_l);
            detail::Accumulator lm;
            const RVector lm_bar = lmmse_asymptotic_sinr_all(profile, 1.0 / sigma2);
            for (Index k : users)
            {
                auto eval = [&](const RVector &w) {
                    try
                    {
                        return sinr_from_moments(user_bar.row(k).transpose(), w, sigma2);
                    }
                    catch (const numeric_error &)
                    {
                        return std::numeric_limits<double>::quiet_NaN();
                    }
                };
                mf.add(eval(RVector::Ones(1)));
                for (std::size_t li = 0; li < n_l; ++li)
                    poly[li].add(w_bar[s][li] ? eval(w_bar[s][li]->coefficients)
                                              : std::numeric_limits<double>::quiet_NaN());
                lm.add(lm_bar(k));
            }
            auto r = base_row(cfg.snr_db[s], "poly-asymptotic", 1);
            finish(r, mf, 0);
            rows.push_back(r);
            for (std::size_t li = 0; li < n_l; ++li)
            {
                auto rp = base_row(cfg.snr_db[s], "poly-asymptotic", cfg.l_values[li]);
                finish(rp, poly[li], 0);
                rows.push_back(rp);
            }
            auto rl = base_row(cfg.snr_db[s], "lmmse-asymptotic", full_rank);
            finish(rl, lm, 0);
            rows.push_back(rl);
        }
    }
    return rows;
}

inline std::vector<ResultRow> run_sinr_sweep(const ExperimentConfig &cfg)
{
    return run_sweep(cfg, make_profile(cfg));
}

/// Same rows as the SINR sweep; the `ber` column carries the mean of Q(sqrt(gamma)) over users and trials.
inline std::vector<ResultRow> run_ber_sweep(const ExperimentConfig &cfg)
{
    return run_sweep(cfg, make_profile(cfg));
}

/// First row matching (method, L), or nullptr.
inline const ResultRow *find_row(const std::vector<ResultRow> &rows, double snr_db, const std::string &method,
                                 int rank)
{
    for (const auto &r : rows)
        if (r.snr_db == snr_db && r.method == method && r.rank == rank)
            return &r;
    return nullptr;
}

// ----- Moment report ---------------------------------------------------------

struct MomentReportRow
{
    int n = 0;
    double mu_bar = 0;
    double mu_mean = 0;
    double mu_std = 0;
    double rel_err_median = 0;      // median over trials of |mu_n - mu_bar_n| / mu_bar_n
    double user_mu_bar_mean = 0;    // mean over sampled users
    double user_mu_mean = 0;        // mean over sampled users and trials
    double user_rel_err_median = 0; // median over sampled users and trials
};

struct MomentReport
{
    std::vector<MomentReportRow> rows;
    MomentTable asymptotic; // global and per-user deterministic moments
    std::vector<Index> sampled_users;
    Index n_rx = 0, n_tx = 0;
    long trials = 0;
    std::uint64_t seed = 0;
};

namespace detail
{
inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1)
        return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

inline double relative_error(double value, double reference)
{
    const double diff = std::abs(value - reference);
    return reference != 0 ? diff / std::abs(reference) : diff;
}
} // namespace detail

inline MomentReport run_moment_report(const ExperimentConfig &cfg, const CorrelationProfile &profile, int n_max)
{
    validate(cfg);
    if (n_max < 0)
        throw config_error("moment order must be nonnegative");
    if (profile.n_rx() != cfg.n_rx || profile.n_tx() != cfg.n_tx)
        throw config_error("profile dimensions do not match N and K");

    const auto state = compute_recursion(profile, n_max);
    MomentReport rep;
    rep.asymptotic = global_moments(state);
    rep.asymptotic.per_user = per_user_moments(state, n_max);
    rep.n_rx = cfg.n_rx;
    rep.n_tx = cfg.n_tx;
    rep.trials = cfg.trials;
    rep.seed = cfg.seed;

    {
        std::vector<Index> all(static_cast<std::size_t>(cfg.n_tx));
        std::iota(all.begin(), all.end(), Index{0});
        Rng rng(derive_seed(cfg.seed, streams::users));
        std::shuffle(all.begin(), all.end(), rng);
        const auto take = static_cast<std::size_t>(std::min<Index>(cfg.sampled_users, cfg.n_tx));
        rep.sampled_users.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(rep.sampled_users.begin(), rep.sampled_users.end());
    }

    const double n = static_cast<double>(cfg.n_rx);
    const auto trials = static_cast<std::size_t>(cfg.trials);
    std::vector<RVector> mu(trials);
    std::vector<RMatrix> um(trials);
    detail::for_each_trial(cfg.trials, cfg.threads, [&](long t) {
        const auto ch =
            draw_channel(profile, derive_seed(cfg.seed, streams::channel, static_cast<std::uint64_t>(t)), cfg.law);
        const RMatrix all = empirical_user_moments_all(user_gram(ch), n_max);
        RVector m = all.colwise().sum().transpose() / n;
        m(0) = 1.0;
        mu[static_cast<std::size_t>(t)] = std::move(m);
        RMatrix sel(static_cast<Index>(rep.sampled_users.size()), n_max + 1);
        for (std::size_t i = 0; i < rep.sampled_users.size(); ++i)
            sel.row(static_cast<Index>(i)) = all.row(rep.sampled_users[i]);
        um[static_cast<std::size_t>(t)] = std::move(sel);
    });

    const RMatrix &ubar = *rep.asymptotic.per_user;
    for (int i = 0; i <= n_max; ++i)
    {
        MomentReportRow row;
        row.n = i;
        row.mu_bar = rep.asymptotic.global(i);
        std::vector<double> vals, errs, uerrs;
        double usum = 0;
        for (std::size_t t = 0; t < trials; ++t)
        {
            vals.push_back(mu[t](i));
            errs.push_back(detail::relative_error(mu[t](i), row.mu_bar));
            for (std::size_t u = 0; u < rep.sampled_users.size(); ++u)
            {
                const double v = um[t](static_cast<Index>(u), i);
                usum += v;
                uerrs.push_back(detail::relative_error(v, ubar(rep.sampled_users[u], i)));
            }
        }
        const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(trials);
        double var = 0;
        for (double v : vals)
            var += (v - mean) * (v - mean);
        row.mu_mean = mean;
        row.mu_std = trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
        row.rel_err_median = detail::median(errs);
        double ub = 0;
        for (Index k : rep.sampled_users)
            ub += ubar(k, i);
        row.user_mu_bar_mean = ub / static_cast<double>(rep.sampled_users.size());
        row.user_mu_mean = usum / static_cast<double>(uerrs.size());
        row.user_rel_err_median = detail::median(uerrs);
        rep.rows.push_back(row);
    }
    return rep;
}

inline MomentReport run_moment_report(const ExperimentConfig &cfg, int n_max)
{
    return run_moment_report(cfg, make_profile(cfg), n_max);
}

inline void write_moment_report_csv(std::ostream &out, const MomentReport &rep)
{
    out << "n,mu_bar,mu_mean,mu_std,rel_err_median,user_mu_bar_mean,user_mu_mean,user_rel_err_median,N,K,trials,seed"
        << "\r\n";
    std::ostringstream line;
    line << std::setprecision(12);
    for (const auto &r : rep.rows)
    {
        line.str({});
        line << r.n << ',' << r.mu_bar << ',' << r.mu_mean << ',' << r.mu_std << ',' << r.rel_err_median << ','
             << r.user_mu_bar_mean << ',' << r.user_mu_mean << ',' << r.user_rel_err_median << ',' << rep.n_rx << ','
             << rep.n_tx << ',' << rep.trials << ',' << rep.seed;
        out << line.str() << "\r\n";
    }
}

// ----- Output files ------------------------------------------------------------

/// Sidecar `<file>.meta.json` carrying the seed, config hash and provenance of an output file.
inline void write_metadata(const std::string &path, const ExperimentConfig &cfg, const std::string &command)
{
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config_hash"] = config_hash(cfg);
    j["provenance"] = detail::provenance_tag(cfg);
    j["config"] = config_to_json(cfg);
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

/// gnuplot script regenerating SINR (dB) or BER curves from a sweep CSV.
inline std::string gnuplot_script(const std::string &csv_name, const ExperimentConfig &cfg, bool ber)
{
    std::ostringstream s;
    s << "# regenerate with: gnuplot " << (ber ? "ber.gp" : "sinr.gp") << "\n";
    s << "set datafile separator ','\n";
    s << "set terminal pngcairo size 900,650\n";
    s << "set output '" << (ber ? "ber.png" : "sinr.png") << "'\n";
    s << "set xlabel 'SNR [dB]'\n";
    s << "set key left top\nset grid\n";
    if (ber)
        s << "set logscale y\nset ylabel 'BER'\nset key left bottom\n";
    else
        s << "set ylabel 'SINR [dB]'\n";
    const std::string col = ber ? "$7" : "10*log10($5)";
    s << "plot \\\n";
    auto curve = [&](const std::string &method, int rank, const std::string &title, const std::string &style) {
        s << "  '" << csv_name << "' skip 1 using 1:((strcol(2) eq '" << method << "' && $3 == " << rank << ") ? "
          << col << " : NaN) with " << style << " title '" << title << "', \\\n";
    };
    const int full = static_cast<int>(std::min(cfg.n_rx, cfg.n_tx));
    curve("matched", 1, "matched filter", "linespoints");
    for (int l : cfg.l_values)
    {
        curve("poly", l, "poly L=" + std::to_string(l), "linespoints");
        if (cfg.include_asymptotic)
            curve("poly-asymptotic", l, "poly L=" + std::to_string(l) + " (deterministic)", "lines");
    }
    curve("lmmse", full, "LMMSE", "linespoints");
    if (cfg.include_asymptotic)
        curve("lmmse-asymptotic", full, "LMMSE (deterministic)", "lines");
    s << "  NaN notitle\n";
    return s.str();
}

} // namespace polymud
