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
#include <polymud/profile_io.hpp>

#include <catch_amalgamated.hpp>

#include <filesystem>

using namespace polymud;

TEST_CASE("profile JSON round trip is exact", "[profile_io]")
{
    const auto p = make_jakes_profile(6, 4, 2.0, 12);
    const auto q = profile_from_json(nlohmann::json::parse(profile_to_json(p).dump()));
    REQUIRE(q.n_rx() == p.n_rx());
    REQUIRE(q.n_tx() == p.n_tx());
    REQUIRE(q.distinct_count() == p.distinct_count());
    for (Index m = 0; m < p.distinct_count(); ++m)
    {
        CHECK(q.factor(m) == p.factor(m));
        CHECK(q.gram(m) == p.gram(m));
        CHECK(q.gram_norm(m) == p.gram_norm(m));
    }
    for (Index j = 0; j < p.n_tx(); ++j)
    {
        CHECK(q.assignment()[static_cast<std::size_t>(j)] == p.assignment()[static_cast<std::size_t>(j)]);
        CHECK(q.scale(j) == p.scale(j));
    }
    const RVector a = global_moments(compute_recursion(p, 4)).global;
    const RVector b = global_moments(compute_recursion(q, 4)).global;
    CHECK(a == b);
}

TEST_CASE("profile files save and load", "[profile_io]")
{
    const auto path = (std::filesystem::temp_directory_path() / "polymud_test.profile.json").string();
    const auto p = make_identity_profile(3, 2);
    save_profile(p, path);
    const auto q = load_profile(path);
    CHECK(q.factor(0) == p.factor(0));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_profile(path), domain_error);
}

TEST_CASE("malformed profile JSON is rejected", "[profile_io]")
{
    auto j = profile_to_json(make_identity_profile(2, 2));
    auto bad_tag = j;
    bad_tag["format"] = "other";
    CHECK_THROWS_AS(profile_from_json(bad_tag), domain_error);
    auto bad_version = j;
    bad_version["version"] = 99;
    CHECK_THROWS_AS(profile_from_json(bad_version), domain_error);
    auto bad_matrix = j;
    bad_matrix["matrices"][0] = nlohmann::json::array({nlohmann::json::array({1.0, 0.0})});
    CHECK_THROWS_AS(profile_from_json(bad_matrix), domain_error);
    auto bad_assignment = j;
    bad_assignment["assignment"] = nlohmann::json::array({0, 5});
    CHECK_THROWS_AS(profile_from_json(bad_assignment), domain_error);
    auto missing = j;
    missing.erase("n_rx");
    CHECK_THROWS_AS(profile_from_json(missing), domain_error);
}
