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
#include <polymud/oracles.hpp>

#include <catch_amalgamated.hpp>

using namespace polymud;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("BPSK bit error rate is the Gaussian tail of sqrt(gamma)", "[detectors]")
{
    CHECK(ber_bpsk(0.0) == 0.5);
    for (double g : {0.1, 0.5, 1.0, 2.0, 4.0, 9.0})
        CHECK_THAT(ber_bpsk(g), WithinRel(oracle::q_function_series(std::sqrt(g)), 1e-9));
    CHECK(ber_bpsk(400.0) < 1e-80);
    CHECK_THROWS_AS(ber_bpsk(-1.0), domain_error);
}

TEST_CASE("weight system layout", "[detectors]")
{
    RVector mu(5);
    mu << 1, 2, 3, 4, 5;
    const auto [phi_mat, phi_vec] = build_weight_system(mu, 0.5, 2);
    CHECK(phi_vec(0) == 2);
    CHECK(phi_vec(1) == 3);
    CHECK(phi_mat(0, 0) == 3 + 0.5 * 2);
    CHECK(phi_mat(0, 1) == 4 + 0.5 * 3);
    CHECK(phi_mat(1, 0) == phi_mat(0, 1));
    CHECK(phi_mat(1, 1) == 5 + 0.5 * 4);
    CHECK_THROWS_AS(build_weight_system(mu, 0.5, 3), domain_error);
    CHECK_THROWS_AS(build_weight_system(mu, -1.0, 1), domain_error);
    CHECK_THROWS_AS(build_weight_system(mu, 0.5, 0), domain_error);
}

TEST_CASE("rank-one weight has a closed form", "[detectors]")
{
    const auto st = compute_recursion(make_identity_profile(20, 10), 2);
    const auto t = global_moments(st);
    const double s2 = 0.3;
    const auto w = optimal_weights(t, s2, 1);
    CHECK_THAT(w.coefficients(0), WithinRel(t.global(1) / (t.global(2) + s2 * t.global(1)), 1e-14));
    CHECK(w.provenance == Provenance::asymptotic);
    CHECK(w.noise_power == s2);
}

TEST_CASE("optimal weights minimize the moment-domain MSE", "[detectors]")
{
    const auto p = make_jakes_profile(20, 8, 2.0, 7);
    auto ch = draw_channel(p, 1);
    const auto t = empirical_moments(ch, 6);
    const double s2 = 0.2;
    const auto w = optimal_weights(t, s2, 3);
    const auto [phi_mat, phi_vec] = build_weight_system(t, s2, 3);
    auto cost = [&](const RVector &v) { return v.dot(phi_mat * v) - 2 * v.dot(phi_vec); };
    const double best = cost(w.coefficients);
    for (Index i = 0; i < 3; ++i)
        for (double eps : {-1e-3, 1e-3})
        {
            RVector v = w.coefficients;
            v(i) += eps * std::abs(v(i));
            CHECK(cost(v) > best);
        }
}

TEST_CASE("singular moment systems are reported", "[detectors]")
{
    RMatrix phi = RMatrix::Ones(2, 2);
    CHECK_THROWS_AS(solve_weights(phi, RVector::Ones(2)), conditioning_error);
    RMatrix zero = RMatrix::Zero(2, 2);
    CHECK_THROWS_AS(solve_weights(zero, RVector::Ones(2)), conditioning_error);
    CHECK_THROWS_AS(solve_weights(RMatrix::Identity(2, 2), RVector::Ones(3)), domain_error);

    // A barely regular system solves but is flagged.
    RMatrix near(2, 2);
    near << 1, 1, 1, 1 + 1e-13;
    const auto w = solve_weights(near, RVector::Ones(2));
    CHECK(w.ill_conditioned);
    CHECK(w.condition_estimate > conditioning_warning);
}

TEST_CASE("multistage detector equals the dense polynomial", "[detectors]")
{
    const auto p = make_jakes_profile(12, 5, 2.0, 3);
    const auto ch = draw_channel(p, 5);
    Rng rng(2);
    const CVector y = draw_entries(12, 1, rng, EntryLaw::gaussian);
    RVector w(4);
    w << 0.7, -0.2, 0.05, -0.003;
    const CVector a = poly_detect(ch, y, fixed_weights(w, 0.1));
    const CVector b = oracle::dense_poly_detect(ch.h, y, w);
    CHECK((a - b).norm() <= 1e-12 * b.norm());
    CHECK_THROWS_AS(poly_detect(ch, CVector::Zero(3), fixed_weights(w, 0.1)), domain_error);
}

TEST_CASE("full-rank polynomial detector reproduces LMMSE", "[detectors]")
{
    for (auto [n, k] : {std::pair<Index, Index>{4, 3}, {3, 5}, {5, 5}})
    {
        const auto ch = draw_channel(make_identity_profile(n, k), 11);
        const double s2 = 1.0;
        const int l = static_cast<int>(std::min(n, k));
        const auto w = optimal_weights(empirical_moments(ch, 2 * l), s2, l);
        Rng rng(3);
        const CVector y = draw_entries(n, 1, rng, EntryLaw::gaussian);
        const CVector a = poly_detect(ch, y, w), b = lmmse_detect(ch, y, s2);
        CHECK((a - b).norm() <= 1e-8 * b.norm());
    }
}

TEST_CASE("LMMSE SINR forms agree and dominate the polynomial detector", "[detectors]")
{
    const auto p = make_jakes_profile(10, 6, 2.0, 8);
    const auto ch = draw_channel(p, 4);
    const double s2 = 0.1;
    const RVector all = lmmse_sinr_all(user_gram(ch), s2);
    const auto w = optimal_weights(empirical_moments(ch, 6), s2, 3);
    for (Index k = 0; k < 6; ++k)
    {
        const auto r = lmmse_sinr_exact(ch, s2, k);
        CHECK_THAT(r.gamma, WithinRel(all(k), 1e-10));
        CHECK(r.method == Method::lmmse);
        CHECK(r.rank == 6);
        CHECK_THAT(r.ber_bpsk, WithinRel(ber_bpsk(r.gamma), 1e-15));
        CHECK(sinr_exact(ch, w, k).gamma <= all(k) * (1 + 1e-12));
        const auto mf = matched_filter_sinr(ch, s2, k);
        CHECK(mf.method == Method::matched);
        CHECK(mf.gamma <= all(k) * (1 + 1e-12));
    }
    CHECK_THROWS_AS(lmmse_sinr_exact(ch, 0.0, 0), domain_error);
    CHECK_THROWS_AS(lmmse_sinr_exact(ch, s2, 6), domain_error);
}

TEST_CASE("matched filter SINR for a single user is the SNR gain", "[detectors]")
{
    // K = 1: no interference, gamma = ||h||^2 / sigma^2.
    const auto ch = draw_channel(make_identity_profile(6, 1), 9);
    const double s2 = 0.25;
    CHECK_THAT(matched_filter_sinr(ch, s2, 0).gamma, WithinRel(ch.h.squaredNorm() / s2, 1e-12));
}

TEST_CASE("SINR from moments rejects a vanishing denominator", "[detectors]")
{
    RVector m(3);
    m << 1, 1, 1; // [B^2]_kk = ([B]_kk)^2 with no noise: interference-free, infinite SINR
    CHECK_THROWS_AS(sinr_from_moments(m, RVector::Ones(1), 0.0), numeric_error);
    CHECK(std::isfinite(sinr_from_moments(m, RVector::Ones(1), 0.1)));
}

TEST_CASE("deterministic SINR approaches the realized SINR", "[detectors]")
{
    const auto p = make_jakes_profile(100, 40, 2.0, 6);
    const auto st = compute_recursion(p, 6);
    const auto t = global_moments(st);
    const RMatrix user = per_user_moments(st, 6);
    const double s2 = 0.1;
    // Individual users fluctuate by O(sqrt(tr Theta^2) / N); the mean over users and draws converges,
    // with a finite-size bias of a few percent at N = 100.
    for (int l = 1; l <= 3; ++l)
    {
        const auto w = optimal_weights(t, s2, l);
        double det = 0, emp = 0;
        for (Index k = 0; k < 40; ++k)
            det += sinr_asymptotic(user, w, s2, k).gamma;
        for (std::uint64_t s = 0; s < 20; ++s)
        {
            const auto ch = draw_channel(p, s);
            for (Index k = 0; k < 40; ++k)
                emp += sinr_exact(ch, w, k).gamma;
        }
        CHECK_THAT(emp / 20.0, WithinRel(det, 0.10));
    }
    CHECK(sinr_asymptotic(user, optimal_weights(t, s2, 1), s2, 0).method == Method::poly_asymptotic);
}

TEST_CASE("Monte Carlo SINR of the LMMSE detector", "[detectors]")
{
    const auto ch = draw_channel(make_identity_profile(6, 3), 13);
    const double s2 = 0.2;
    const CMatrix g = user_gram(ch);
    CMatrix a = g;
    a.diagonal().array() += s2;
    const CVector gains = a.llt().solve(g).diagonal();
    const RVector mc = monte_carlo_sinr(
        ch, s2, [&](const CMatrix &y) { return lmmse_detect_batch(ch, y, s2); }, gains, 200000, 4);
    const RVector exact = lmmse_sinr_all(g, s2);
    for (Index k = 0; k < 3; ++k)
        CHECK_THAT(mc(k), WithinRel(exact(k), 0.02));
    CHECK_THROWS_AS(monte_carlo_sinr(ch, s2, [&](const CMatrix &y) { return y; }, CVector::Ones(2), 10, 1),
                    domain_error);
}

TEST_CASE("method names", "[detectors]")
{
    CHECK(to_string(Method::matched) == "matched");
    CHECK(to_string(Method::poly) == "poly");
    CHECK(to_string(Method::lmmse) == "lmmse");
    CHECK(to_string(Method::lmmse_asymptotic) == "lmmse-asymptotic");
    CHECK(to_string(Method::poly_asymptotic) == "poly-asymptotic");
}
