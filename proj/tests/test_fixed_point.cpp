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

#include <polymud/detectors.hpp>
#include <polymud/fixed_point.hpp>
#include <polymud/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace polymud;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("square identity profile at z = -1 gives the golden ratio conjugate", "[fixed_point]")
{
    const auto sol = solve_fixed_point(make_identity_profile(20, 20), -1.0);
    CHECK_THAT(stieltjes_m(sol), WithinRel((std::sqrt(5.0) - 1) / 2, 1e-12));
    CHECK(sol.residual <= 1e-10);
}

TEST_CASE("identity profile matches the Marchenko-Pastur Stieltjes transform", "[fixed_point]")
{
    for (auto [n, k] : {std::pair<Index, Index>{10, 40}, {20, 40}, {40, 20}})
        for (double z : {-0.01, -0.5, -3.0})
        {
            const double c = static_cast<double>(n) / static_cast<double>(k);
            const auto sol = solve_fixed_point(make_identity_profile(n, k), z);
            CHECK_THAT(stieltjes_m(sol), WithinRel(oracle::mp_stieltjes(c, z), 1e-10));
        }
}

TEST_CASE("fixed point solution satisfies its defining equation", "[fixed_point]")
{
    const auto p = make_jakes_profile(30, 12, 2.0, 4);
    const double z = -0.05;
    const auto sol = solve_fixed_point(p, z);
    CHECK(sol.residual <= 1e-10);
    CHECK((sol.t_matrix - sol.t_matrix.adjoint()).norm() <= 1e-12 * sol.t_matrix.norm());
    CMatrix s = CMatrix::Zero(30, 30);
    for (Index j = 0; j < 12; ++j)
        s += p.column_gram(j) / (1.0 + sol.delta_for_column(j));
    s /= 12.0;
    s.diagonal().array() -= z;
    CHECK((s * sol.t_matrix - CMatrix::Identity(30, 30)).norm() <= 1e-10);
    for (Index j = 0; j < 12; ++j)
        CHECK_THAT(sol.delta_for_column(j),
                   WithinRel((p.column_gram(j) * sol.t_matrix).trace().real() / 12.0, 1e-10));
}

TEST_CASE("damping reaches the same solution", "[fixed_point]")
{
    const auto p = make_jakes_profile(20, 10, 2.0, 2);
    const auto a = solve_fixed_point(p, -0.1);
    FixedPointOptions opt;
    opt.damping = 0.5;
    const auto b = solve_fixed_point(p, -0.1, opt);
    CHECK((a.deltas - b.deltas).norm() <= 1e-10 * a.deltas.norm());
}

TEST_CASE("fixed point input validation and iteration cap", "[fixed_point]")
{
    const auto p = make_identity_profile(5, 5);
    CHECK_THROWS_AS(solve_fixed_point(p, 0.0), domain_error);
    CHECK_THROWS_AS(solve_fixed_point(p, 1.0), domain_error);
    FixedPointOptions opt;
    opt.damping = 1.0;
    CHECK_THROWS_AS(solve_fixed_point(p, -1.0, opt), domain_error);
    opt = {};
    opt.max_iter = 2;
    CHECK_THROWS_AS(solve_fixed_point(p, -1e-3, opt), convergence_error);
    CHECK_THROWS_AS(lmmse_asymptotic_sinr(p, 0, -1.0), domain_error);
    CHECK_THROWS_AS(lmmse_asymptotic_sinr(p, 7, 1.0), domain_error);
}

TEST_CASE("deterministic LMMSE SINR approaches the realized SINR", "[fixed_point]")
{
    const auto p = make_jakes_profile(80, 32, 2.0, 9);
    const double snr = 10.0;
    const RVector det = lmmse_asymptotic_sinr_all(p, snr);
    CHECK_THAT(lmmse_asymptotic_sinr(p, 5, snr), WithinRel(det(5), 1e-14));
    double mean_det = det.mean(), mean_emp = 0;
    const int draws = 20;
    for (int s = 0; s < draws; ++s)
        mean_emp += lmmse_sinr_all(user_gram(draw_channel(p, static_cast<std::uint64_t>(s))), 1.0 / snr).mean();
    mean_emp /= draws;
    CHECK_THAT(mean_emp, WithinRel(mean_det, 0.05));
}

TEST_CASE("Stieltjes transform against simulation", "[fixed_point]")
{
    const auto p = make_jakes_profile(64, 26, 2.0, 1);
    const double s2 = 0.1;
    const double m = stieltjes_m(solve_fixed_point(p, -s2));
    double mc = 0;
    const int draws = 30;
    for (int s = 0; s < draws; ++s)
    {
        auto ch = draw_channel(p, static_cast<std::uint64_t>(s));
        CMatrix a = gram(ch);
        a.diagonal().array() += s2;
        mc += a.llt().solve(CMatrix::Identity(64, 64)).trace().real() / 64.0;
    }
    CHECK_THAT(mc / draws, WithinRel(m, 0.02));
}
