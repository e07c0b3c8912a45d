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

// `.profile.json` reader and writer.
//
// {
//   "format": "polymud-profile", "version": 1,
//   "n_rx": N, "n_tx": K,
//   "assignment": [m_0, ..., m_{K-1}],          // column j -> distinct matrix
//   "scales": [s_0, ..., s_{K-1}],              // R_j = s_j * matrices[m_j]
//   "matrices": [ [[re, im], ...], ... ],       // distinct factors, N*N row-major
//   "grams": [ [[re, im], ...], ... ],          // optional, factor * factor^H
//   "gram_norms": [ ... ]                       // optional, spectral norms of grams
// }

#pragma once

#include "channel_models.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace polymud
{

inline constexpr const char *profile_format_tag = "polymud-profile";
inline constexpr int profile_format_version = 1;

namespace detail
{
inline nlohmann::json matrix_to_json(const CMatrix &m)
{
    auto arr = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            arr.push_back({m(r, c).real(), m(r, c).imag()});
    return arr;
}

inline CMatrix matrix_from_json(const nlohmann::json &j, Index n)
{
    if (!j.is_array() || static_cast<Index>(j.size()) != n * n)
        throw domain_error("profile file: matrix must hold N*N (re, im) pairs");
    CMatrix m(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c)
        {
            const auto &e = j[static_cast<std::size_t>(r * n + c)];
            if (!e.is_array() || e.size() != 2)
                throw domain_error("profile file: entries must be [re, im] pairs");
            m(r, c) = cdouble(e[0].get<double>(), e[1].get<double>());
        }
    return m;
}
} // namespace detail

inline nlohmann::json profile_to_json(const CorrelationProfile &p)
{
    nlohmann::json j;
    j["format"] = profile_format_tag;
    j["version"] = profile_format_version;
    j["n_rx"] = p.n_rx();
    j["n_tx"] = p.n_tx();
    j["assignment"] = std::vector<Index>(p.assignment().begin(), p.assignment().end());
    j["scales"] = std::vector<double>(p.scales().begin(), p.scales().end());
    auto mats = nlohmann::json::array(), grams = nlohmann::json::array(), norms = nlohmann::json::array();
    for (Index m = 0; m < p.distinct_count(); ++m)
    {
        mats.push_back(detail::matrix_to_json(p.factor(m)));
        grams.push_back(detail::matrix_to_json(p.gram(m)));
        norms.push_back(p.gram_norm(m));
    }
    j["matrices"] = std::move(mats);
    j["grams"] = std::move(grams);
    j["gram_norms"] = std::move(norms);
    return j;
}

inline CorrelationProfile profile_from_json(const nlohmann::json &j)
{
    try
    {
        if (j.value("format", std::string{}) != profile_format_tag)
            throw domain_error("profile file: missing or wrong format tag");
        if (j.value("version", 0) != profile_format_version)
            throw domain_error("profile file: unsupported version");
        const Index n = j.at("n_rx").get<Index>();
        const Index k = j.at("n_tx").get<Index>();
        if (n < 1 || k < 1)
            throw domain_error("profile file: dimensions must be positive");

        std::vector<CMatrix> factors, grams;
        for (const auto &m : j.at("matrices"))
            factors.push_back(detail::matrix_from_json(m, n));
        if (j.contains("grams"))
            for (const auto &m : j.at("grams"))
                grams.push_back(detail::matrix_from_json(m, n));
        std::vector<double> norms;
        if (j.contains("gram_norms"))
            norms = j.at("gram_norms").get<std::vector<double>>();
        auto assignment = j.at("assignment").get<std::vector<Index>>();
        std::vector<double> scales;
        if (j.contains("scales"))
            scales = j.at("scales").get<std::vector<double>>();
        return CorrelationProfile(n, k, std::move(factors), std::move(assignment), std::move(scales),
                                  std::move(grams), std::move(norms));
    }
    catch (const nlohmann::json::exception &e)
    {
        throw domain_error(std::string("profile file: ") + e.what());
    }
}

inline void save_profile(const CorrelationProfile &p, const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw domain_error("cannot open '" + path + "' for writing");
    out << profile_to_json(p).dump() << '\n';
}

inline CorrelationProfile load_profile(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw domain_error("cannot open '" + path + "'");
    nlohmann::json j;
    try
    {
        in >> j;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw domain_error("profile file '" + path + "': " + e.what());
    }
    return profile_from_json(j);
}

} // namespace polymud
