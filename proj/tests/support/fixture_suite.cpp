#include "support/fixture_suite.hpp"

#include "biaseval/dataset.hpp"
#include "biaseval/jsonl.hpp"

namespace biaseval::testsupport {

FixtureSuiteOutcome run_grader_fixture_suite(const std::filesystem::path& fixtures,
                                             grader::Grader& grader) {
    FixtureSuiteOutcome outcome;
    jsonl::for_each(fixtures, [&](int line, const nlohmann::json& row) {
        ++outcome.total;
        const std::string note = row.value("note", "line " + std::to_string(line));

        QuestionVariant variant{dataset::parse_record(row.at("record"), line),
                                parse_format(row.at("format").get<std::string>())};
        gateway::ModelResponse response;
        response.question_id = variant.id();
        response.format = variant.format;
        response.raw_text = row.at("response").get<std::string>();
        response.model = "fixture";

        grader::GradedResponse graded = grader.grade(variant, response);

        const std::string want_role = row.at("expected_role").get<std::string>();
        const std::string got_role = graded.chosen_role ? to_string(*graded.chosen_role)
                                                        : std::string("unresolved");
        const std::string want_path = row.at("expected_path").get<std::string>();
        const std::string got_path = grader::to_string(graded.path);

        if (got_role == want_role && got_path == want_path) {
            ++outcome.agreed;
        } else {
            outcome.failures.push_back(note + ": expected " + want_role + "/" + want_path +
                                       ", got " + got_role + "/" + got_path +
                                       (graded.error ? " (" + *graded.error + ")" : ""));
        }
    });
    return outcome;
}

}  // namespace biaseval::testsupport
