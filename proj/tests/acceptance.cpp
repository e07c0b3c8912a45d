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

// Acceptance runner: prints one PASS/FAIL line per criterion and exits nonzero on any failure.
// Optional arguments select criteria by number, e.g. `polymud_acceptance 1 2 6`.

#include <polymud/validation.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char **argv)
{
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i)
        ids.push_back(std::atoi(argv[i]));

    polymud::ValidationOptions opt;
    const auto results = polymud::run_validation(opt, ids, [](const polymud::CriterionResult &r) {
        std::cout << polymud::format_result(r) << " (" << std::fixed << std::setprecision(1) << r.seconds << " s)"
                  << std::defaultfloat << std::endl;
    });

    long failed = 0;
    for (const auto &r : results)
        failed += r.passed ? 0 : 1;
    std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
