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

// Command line front end. Exit codes: 0 success, 2 configuration error,
// 3 numeric or convergence failure, 4 validation failure.

#include <polymud/validation.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace
{

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_validation = 4;

struct Overrides
{
    std::string config;
    std::vector<double> snr_db;
    std::optional<long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
    bool plot = false;
};

void add_common(CLI::App *cmd, Overrides &o)
{
    cmd->add_option("--config", o.config, "JSON experiment configuration (defaults: N=100, K=40 Jakes)");
    cmd->add_option("--snr-db", o.snr_db, "SNR grid in dB, e.g. --snr-db 0,5,10")->delimiter(',');
    cmd->add_option("--trials", o.trials, "Number of channel realizations");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
    cmd->add_option("--out", o.out, "Output directory");
}

polymud::ExperimentConfig resolve(const Overrides &o)
{
    polymud::ExperimentConfig c = o.config.empty() ? polymud::ExperimentConfig{} : polymud::load_config(o.config);
    if (!o.snr_db.empty())
        c.snr_db = o.snr_db;
    if (o.trials)
        c.trials = *o.trials;
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    if (!o.out.empty())
        c.outputs = o.out;
    polymud::validate(c);
    return c;
}

std::filesystem::path prepare_outputs(const polymud::ExperimentConfig &c)
{
    const std::filesystem::path dir(c.outputs);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw polymud::config_error("cannot create output directory '" + c.outputs + "': " + ec.message());
    return dir;
}

std::ofstream open_output(const std::filesystem::path &p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw polymud::config_error("cannot write '" + p.string() + "'");
    return out;
}

int run_sweep_command(const Overrides &o, bool ber)
{
    const auto cfg = resolve(o);
    const auto dir = prepare_outputs(cfg);
    const auto rows = ber ? polymud::run_ber_sweep(cfg) : polymud::run_sinr_sweep(cfg);
    const std::string name = ber ? "ber.csv" : "sinr.csv";
    {
        auto out = open_output(dir / name);
        polymud::write_results_csv(out, rows);
    }
    polymud::write_metadata((dir / (name + ".meta.json")).string(), cfg, ber ? "ber-sweep" : "sinr-sweep");
    if (o.plot)
    {
        auto gp = open_output(dir / (ber ? "ber.gp" : "sinr.gp"));
        gp << polymud::gnuplot_script(name, cfg, ber);
    }
    long failures = 0;
    for (const auto &r : rows)
        failures += r.failures;
    if (failures > 0)
        std::cerr << "warning: " << failures << " SINR samples were dropped on numeric errors\n";
    std::cout << "wrote " << (dir / name).string() << " (" << rows.size() << " rows)\n";
    return 0;
}

int run_moments_command(const Overrides &o, std::optional<int> order)
{
    auto cfg = resolve(o);
    if (order)
        cfg.moment_order = *order;
    const auto dir = prepare_outputs(cfg);
    const auto rep = polymud::run_moment_report(cfg, cfg.moment_order);
    {
        auto out = open_output(dir / "moment_report.csv");
        polymud::write_moment_report_csv(out, rep);
    }
    {
        auto out = open_output(dir / "moments_asymptotic.csv");
        polymud::write_moment_csv(out, rep.asymptotic);
    }
    polymud::write_metadata((dir / "moment_report.csv.meta.json").string(), cfg, "moments");
    polymud::write_metadata((dir / "moments_asymptotic.csv.meta.json").string(), cfg, "moments");
    std::cout << "wrote " << (dir / "moment_report.csv").string() << " and " << (dir / "moments_asymptotic.csv").string()
              << "\n";
    return 0;
}

int run_validate_command(const Overrides &o, const std::vector<int> &criteria, double perturb)
{
    polymud::ValidationOptions opt;
    opt.perturbation = perturb;
    if (o.seed)
        opt.seed = *o.seed;
    if (o.trials)
        opt.sweep_trials = *o.trials;
    if (o.threads)
        opt.threads = *o.threads;
    if (opt.sweep_trials < 1 || opt.threads < 1)
        throw polymud::config_error("trials and threads must be at least 1");
    for (int id : criteria)
        if (id < 1 || id > 9)
            throw polymud::config_error("criteria are numbered 1 to 9");
    const auto results = polymud::run_validation(opt, criteria, [](const polymud::CriterionResult &r) {
        std::cout << polymud::format_result(r) << std::endl;
    });
    bool ok = true;
    for (const auto &r : results)
        ok = ok && r.passed;
    return ok ? 0 : exit_validation;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"polymud: deterministic moments and polynomial expansion multiuser detection"};
    app.require_subcommand(1);

    Overrides sinr_o, ber_o, mom_o, val_o;
    auto *sinr = app.add_subcommand("sinr-sweep", "Mean SINR versus SNR for matched filter, polynomial and LMMSE");
    add_common(sinr, sinr_o);
    sinr->add_flag("--plot", sinr_o.plot, "Also write a gnuplot script");
    auto *ber = app.add_subcommand("ber-sweep", "BPSK bit error rate versus SNR");
    add_common(ber, ber_o);
    ber->add_flag("--plot", ber_o.plot, "Also write a gnuplot script");
    auto *mom = app.add_subcommand("moments", "Deterministic versus empirical moments");
    add_common(mom, mom_o);
    std::optional<int> order;
    mom->add_option("--order", order, "Highest moment order");
    auto *val = app.add_subcommand("validate", "Run the acceptance criteria");
    val->add_option("--seed", val_o.seed, "Master seed");
    val->add_option("--trials", val_o.trials, "Trials for the curve-shape criterion");
    val->add_option("--threads", val_o.threads, "Worker threads");
    std::vector<int> criteria;
    val->add_option("--criteria", criteria, "Subset of criteria, e.g. --criteria 1,2,6")->delimiter(',');
    double perturb = 0.0;
    val->add_option("--perturb", perturb, "Relative perturbation of the moment recursion")->group("");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try
    {
        if (*sinr)
            return run_sweep_command(sinr_o, false);
        if (*ber)
            return run_sweep_command(ber_o, true);
        if (*mom)
            return run_moments_command(mom_o, order);
        return run_validate_command(val_o, criteria, perturb);
    }
    catch (const polymud::config_error &e)
    {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const polymud::domain_error &e)
    {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const polymud::numeric_error &e)
    {
        std::cerr << "numeric error: " << e.what() << "\n";
        return exit_numeric;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
