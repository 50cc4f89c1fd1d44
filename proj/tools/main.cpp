#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "biaseval/dataset.hpp"
#include "biaseval/runner.hpp"
#include "biaseval/types.hpp"

namespace {

using namespace biaseval;

struct CliOverrides {
    std::string config_path;
    std::string backend;
    std::string judge_backend;
    std::vector<std::string> strategies;
    std::vector<std::string> formats;
    std::vector<std::string> categories;
    std::string out;
    std::string corpus;
    std::string templates;
};

// Precedence: defaults < config file < command-line flags.
nlohmann::json resolve_config(const CliOverrides& o) {
    nlohmann::json overlay = nlohmann::json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) {
            throw ValidationError("cannot read config file: " + o.config_path);
        }
        try {
            in >> overlay;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("config file " + o.config_path + ": " + e.what());
        }
    }
    nlohmann::json config = runner::merged_config(overlay);
    if (!o.backend.empty()) config["subject"]["kind"] = o.backend;
    if (!o.judge_backend.empty()) config["judge"]["kind"] = o.judge_backend;
    if (!o.strategies.empty()) config["strategies"] = o.strategies;
    if (!o.formats.empty()) config["formats"] = o.formats;
    if (!o.categories.empty()) config["categories"] = o.categories;
    if (!o.out.empty()) config["out"] = o.out;
    if (!o.corpus.empty()) config["corpus"] = o.corpus;
    if (!o.templates.empty()) config["templates"] = o.templates;
    return config;
}

int do_validate(const nlohmann::json& config, bool expect_paper_counts) {
    auto records = dataset::load_corpus(config.at("corpus").get<std::string>());
    dataset::CorpusStats stats = dataset::validate_corpus(records);
    std::cout << stats.to_table();
    if (expect_paper_counts) {
        dataset::CountsCheck check = dataset::check_paper_counts(stats);
        std::cout << check.to_table();
        return check.passed() ? 0 : 1;
    }
    return 0;
}

void print_manifest(const runner::RunManifest& m, const std::filesystem::path& out_dir) {
    std::cout << "plan " << m.plan_hash << "\n"
              << "variants " << m.variants << ", prompts " << m.prompts << "\n"
              << "responses: " << m.responses_ok << " ok, " << m.responses_failed << " failed\n"
              << "graded:    " << m.graded_ok << " ok, " << m.graded_failed << " failed\n"
              << "report cells: " << m.report_cells << "\n";
    for (const std::string& f : m.failures) {
        std::cout << "  failure: " << f << "\n";
    }
    std::cout << "outputs in " << out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-ended bias evaluation harness for chat models"};
    app.require_subcommand(1);

    CliOverrides o;
    app.add_option("--config", o.config_path, "JSON configuration file");
    app.add_option("--backend", o.backend, "subject backend kind: http, record or replay");
    app.add_option("--judge-backend", o.judge_backend, "judge backend kind");
    app.add_option("--strategy", o.strategies, "restrict to these strategies (repeatable)");
    app.add_option("--format", o.formats, "restrict to these question formats (repeatable)");
    app.add_option("--category", o.categories, "restrict to these bias categories (repeatable)");
    app.add_option("--out", o.out, "run output directory");
    app.add_option("--corpus", o.corpus, "corpus JSONL file");
    app.add_option("--templates", o.templates, "prompt template directory");

    CLI::App* cmd_transform =
        app.add_subcommand("transform", "expand a corpus into per-format question variants");
    CLI::App* cmd_run =
        app.add_subcommand("run", "full pipeline: prompt, complete, grade, report");
    CLI::App* cmd_grade =
        app.add_subcommand("grade", "re-grade persisted responses and rebuild the report");
    CLI::App* cmd_report =
        app.add_subcommand("report", "re-aggregate graded answers into fresh report files");
    CLI::App* cmd_validate = app.add_subcommand("validate", "check corpus shape and counts");
    bool expect_paper_counts = false;
    cmd_validate->add_flag("--expect-paper-counts", expect_paper_counts,
                           "require the published full-corpus counts");

    // Let the shared options (--corpus, --out, ...) appear after the
    // subcommand as well as before it.
    for (CLI::App* sub : {cmd_transform, cmd_run, cmd_grade, cmd_report, cmd_validate}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        nlohmann::json config = resolve_config(o);
        if (cmd_validate->parsed()) {
            return do_validate(config, expect_paper_counts);
        }

        runner::ExperimentPlan plan = runner::ExperimentPlan::from_json(config);
        runner::Runner engine(plan);
        if (cmd_transform->parsed()) {
            long n = engine.transform();
            std::cout << "wrote " << n << " variants to "
                      << (plan.out_dir / "variants.jsonl").string() << "\n";
            return 0;
        }

        runner::RunManifest manifest;
        if (cmd_run->parsed()) {
            manifest = engine.run();
        } else if (cmd_grade->parsed()) {
            manifest = engine.regrade();
        } else if (cmd_report->parsed()) {
            manifest = engine.rereport();
        }
        print_manifest(manifest, plan.out_dir);
        return manifest.clean() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
