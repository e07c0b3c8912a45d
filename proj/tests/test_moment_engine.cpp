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

#include <polymud/moment_engine.hpp>
#include <polymud/oracles.hpp>

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace polymud;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
CorrelationProfile random_profile(Rng &rng, Index n, Index m, Index k)
{
    std::vector<CMatrix> factors;
    for (Index i = 0; i < m; ++i)
        factors.push_back(draw_entries(n, n, rng, EntryLaw::gaussian) / std::sqrt(static_cast<double>(n)));
    std::vector<Index> assignment;
    std::vector<double> scales;
    for (Index j = 0; j < k; ++j)
    {
        assignment.push_back(j % m);
        scales.push_back(0.5 + 0.25 * static_cast<double>(j % 4));
    }
    return CorrelationProfile(n, k, factors, assignment, scales);
}
} // namespace

TEST_CASE("square identity profile gives Catalan numbers", "[moment_engine]")
{
    const auto st = compute_recursion(make_identity_profile(30, 30), 8);
    const RVector mu = global_moments(st).global;
    const double catalan[] = {1, 1, 2, 5, 14, 42, 132, 429, 1430};
    for (int n = 0; n <= 8; ++n)
        CHECK_THAT(mu(n), WithinRel(catalan[n], 1e-13));
}

TEST_CASE("identity profile matches Marchenko-Pastur moments", "[moment_engine]")
{
    for (auto [n, k] : {std::pair<Index, Index>{10, 40}, {20, 40}, {40, 20}})
    {
        const double c = static_cast<double>(n) / static_cast<double>(k);
        const RVector mu = global_moments(compute_recursion(make_identity_profile(n, k), 8)).global;
        for (int i = 0; i <= 8; ++i)
            CHECK_THAT(mu(i), WithinRel(oracle::mp_moment(c, i), 1e-12));
    }
}

TEST_CASE("scaled recursion matches the literal recursion", "[moment_engine]")
{
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial)
    {
        const auto p = random_profile(rng, 3 + trial, 1 + trial % 3, 2 + 2 * trial);
        const auto st = compute_recursion(p, 6);
        const RVector mu = global_moments(st).global;
        const auto ref = oracle::naive_recursion(p, 6);
        for (int n = 0; n <= 6; ++n)
            CHECK_THAT(mu(n), WithinRel(ref.mu[static_cast<std::size_t>(n)], 1e-12));
    }
}

TEST_CASE("recursion state has Hermitian iterates and per-class storage", "[moment_engine]")
{
    Rng rng(4);
    const auto p = random_profile(rng, 5, 2, 6);
    const auto st = compute_recursion(p, 5);
    CHECK(st.f_hat.rows() == static_cast<Index>(st.classes.size()));
    CHECK(st.delta_hat.cols() == 6);
    for (const auto &a : st.a_hat)
        CHECK((a - a.adjoint()).norm() <= 1e-12 * a.norm());
    CHECK(st.q_hat[0].size() == 0);
}

TEST_CASE("per-user moments average to the global moments", "[moment_engine]")
{
    const auto p = make_jakes_profile(12, 5, 2.0, 3);
    const auto st = compute_recursion(p, 6);
    const RVector mu = global_moments(st).global;
    const RMatrix user = per_user_moments(st, 6);
    for (int n = 1; n <= 6; ++n)
        CHECK_THAT(user.col(n).sum() / 12.0, WithinRel(mu(n), 1e-12));
    CHECK((user.col(0).array() == 1.0).all());
    CHECK_THROWS_AS(per_user_moments(compute_recursion(p, 2), 5), domain_error);
}

TEST_CASE("per-user moments for the identity profile", "[moment_engine]")
{
    // delta^_0 = N/K, so the first user moment is ||h_k||^2 in expectation.
    const auto st = compute_recursion(make_identity_profile(10, 4), 4);
    const RMatrix user = per_user_moments(st, 4);
    CHECK_THAT(user(0, 1), WithinRel(2.5, 1e-14));
    CHECK((user.row(0) - user.row(3)).norm() == 0.0);
}

TEST_CASE("weighted moments with D = I reduce to global moments", "[moment_engine]")
{
    Rng rng(5);
    const auto p = random_profile(rng, 6, 2, 4);
    const auto st = compute_recursion(p, 4);
    CHECK((weighted_moments(st, CMatrix::Identity(6, 6)) - global_moments(st).global).norm() < 1e-12);
    CHECK_THROWS_AS(weighted_moments(st, CMatrix::Identity(5, 5)), domain_error);
}

TEST_CASE("moments scale as s^(2n) under R -> sR", "[moment_engine]")
{
    Rng rng(6);
    const auto p = random_profile(rng, 5, 2, 7);
    std::vector<CMatrix> factors{2.0 * p.factor(0), 2.0 * p.factor(1)};
    const CorrelationProfile q(5, 7, factors, std::vector<Index>(p.assignment().begin(), p.assignment().end()),
                               std::vector<double>(p.scales().begin(), p.scales().end()));
    const RVector a = global_moments(compute_recursion(p, 5)).global;
    const RVector b = global_moments(compute_recursion(q, 5)).global;
    for (int n = 0; n <= 5; ++n)
        CHECK_THAT(b(n), WithinRel(std::pow(4.0, n) * a(n), 1e-12));
}

TEST_CASE("deterministic and empirical Hankel matrices are positive semidefinite", "[moment_engine]")
{
    const auto p = make_jakes_profile(16, 6, 2.0, 10);
    const RVector mu = global_moments(compute_recursion(p, 8)).global;
    auto ch = draw_channel(p, 3);
    const RVector emp = empirical_moments(ch, 8).global;
    for (const RVector *m : {&mu, &emp})
        for (Index offset : {0, 1})
        {
            const RMatrix h = hankel_matrix(*m, 4, offset);
            const double lo = Eigen::SelfAdjointEigenSolver<RMatrix>(h).eigenvalues().minCoeff();
            CHECK(lo >= -1e-10 * h.norm());
        }
    CHECK_THROWS_AS(hankel_matrix(mu, 5, 1), domain_error);
}

TEST_CASE("empirical moments agree between Gram orientations", "[moment_engine]")
{
    const auto p = make_jakes_profile(9, 4, 2.0, 2);
    auto ch = draw_channel(p, 1);
    const RVector fast = empirical_moments(ch, 6).global;
    const RVector direct = empirical_moments(gram(ch), 6).global;
    for (int n = 0; n <= 6; ++n)
        CHECK_THAT(fast(n), WithinRel(direct(n), 1e-12));
}

TEST_CASE("Krylov forms sum to the trace of B^n", "[moment_engine]")
{
    const auto p = make_jakes_profile(8, 5, 2.0, 4);
    auto ch = draw_channel(p, 2);
    const RVector mu = empirical_moments(ch, 5).global;
    const RMatrix all = empirical_user_moments_all(user_gram(ch), 5);
    for (int n = 1; n <= 5; ++n)
        CHECK_THAT(all.col(n).sum(), WithinRel(8.0 * mu(n), 1e-12));
    for (Index k = 0; k < 5; ++k)
    {
        const CVector kf = krylov_forms(ch, k, 5);
        CHECK(kf.imag().cwiseAbs().maxCoeff() <= 1e-12 * kf.real().cwiseAbs().maxCoeff());
        // Nested Krylov forms agree with the all-user computation.
        CHECK((kf.real() - all.row(k).transpose()).norm() <= 1e-12 * all.row(k).norm());
    }
    CHECK_THROWS_AS(krylov_forms(ch, 5, 3), domain_error);
}

TEST_CASE("test perturbation changes the moments", "[moment_engine]")
{
    const auto p = make_identity_profile(8, 8);
    const RVector a = global_moments(compute_recursion(p, 4)).global;
    const RVector b = global_moments(compute_recursion(p, 4, RecursionOptions{1e-3})).global;
    CHECK(std::abs(a(4) - b(4)) > 1e-6);
    CHECK(a(1) == b(1));
}

TEST_CASE("moment table CSV layout", "[moment_engine]")
{
    const auto st = compute_recursion(make_identity_profile(4, 2), 2);
    const auto t = asymptotic_table(st);
    std::ostringstream out;
    write_moment_csv(out, t);
    const std::string s = out.str();
    CHECK(s.rfind("n,mu_global,mu_user_1,mu_user_2,provenance,N,K\r\n", 0) == 0);
    CHECK(s.find("0,1,1,1,asymptotic,4,2\r\n") != std::string::npos);
    CHECK_THROWS_AS(compute_recursion(make_identity_profile(4, 2), -1), domain_error);
}
