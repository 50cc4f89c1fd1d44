#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "biaseval/grader.hpp"

namespace biaseval::testsupport {

/// Outcome of grading every labeled fixture: `failures` holds one line per
/// disagreement between the grader and the fixture's expected role/path.
struct FixtureSuiteOutcome {
    int total = 0;
    int agreed = 0;
    std::vector<std::string> failures;

    bool all_agree() const { return agreed == total && total > 0; }
};

/// Runs data/grader_fixtures.jsonl through `grader` (expected to be bound to
/// a replay judge over data/fixtures/grader_judge.jsonl) and compares each
/// result against the row's expected_role and expected_path labels.
FixtureSuiteOutcome run_grader_fixture_suite(const std::filesystem::path& fixtures,
                                             grader::Grader& grader);

}  // namespace biaseval::testsupport
