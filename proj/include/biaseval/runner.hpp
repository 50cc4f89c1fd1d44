#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaseval/dataset.hpp"
#include "biaseval/gateway.hpp"
#include "biaseval/grader.hpp"
#include "biaseval/metrics.hpp"
#include "biaseval/prompting.hpp"
#include "biaseval/types.hpp"

/// End-to-end orchestration: expand → prompt → complete → grade → aggregate
/// → report, with every stage persisted as JSONL inside the run directory so
/// an interrupted run resumes where it stopped. Work items are keyed by
/// request fingerprint (model calls) and by (question, format, strategy)
/// (graded rows); whatever is already on disk is not redone.
namespace biaseval::runner {

struct ExperimentPlan {
    std::filesystem::path corpus_path;
    std::filesystem::path template_dir = "templates";
    std::filesystem::path out_dir;

    // Empty filter = all members of that dimension.
    std::vector<BiasCategory> categories;
    std::vector<QuestionFormat> formats;
    std::vector<ContextCondition> conditions;
    std::vector<StrategyKind> strategies;

    gateway::BackendConfig subject;
    gateway::BackendConfig judge;
    grader::GraderConfig grading;

    /// Builds a plan from the merged configuration document (defaults, then
    /// config file, then CLI overrides).
    static ExperimentPlan from_json(const nlohmann::json& config);
    nlohmann::json to_json() const;

    void validate() const;

    bool wants(BiasCategory c) const;
    bool wants(QuestionFormat f) const;
    bool wants(ContextCondition c) const;
    std::vector<StrategyKind> effective_strategies() const;
};

/// Configuration document with every default filled in; the config file and
/// CLI flags overlay this.
nlohmann::json default_config();

/// default_config() with `overlay` deep-merged on top.
nlohmann::json merged_config(const nlohmann::json& overlay);

/// Hash of everything that determines the run's results: filters, the
/// sampling-relevant backend fields (model, temperature, max_tokens),
/// synonym table, corpus bytes and template bytes. Operational knobs
/// (parallelism, timeouts, endpoints, fixture paths) deliberately excluded
/// so tuning them doesn't orphan a half-finished run directory.
std::string plan_hash(const ExperimentPlan& plan);

struct RunManifest {
    std::string plan_hash;
    std::vector<std::string> stages_completed;
    long variants = 0;
    long prompts = 0;
    long responses_ok = 0;
    long responses_failed = 0;
    long graded_ok = 0;
    long graded_failed = 0;
    long report_cells = 0;
    std::vector<std::string> failures;  // capped list of "id: reason" notes

    bool clean() const { return responses_failed == 0 && graded_failed == 0; }
    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& obj);
};

/// One unit of work: a question variant under one strategy.
struct WorkItem {
    QuestionVariant variant;
    StrategyKind strategy = StrategyKind::Baseline;
    RenderedPrompt prompt;
    std::uint64_t fingerprint = 0;

    std::string key() const;  // question_id / format / strategy
};

class Runner {
public:
    /// Transports are injectable for tests and fixture generation; null
    /// means the gateway's default (HTTP, or none for replay).
    explicit Runner(ExperimentPlan plan,
                    std::shared_ptr<gateway::ChatTransport> subject_transport = nullptr,
                    std::shared_ptr<gateway::ChatTransport> judge_transport = nullptr);

    /// Full pipeline. Throws ValidationError if the run directory belongs to
    /// a different plan.
    RunManifest run();

    /// Re-grades every persisted response from scratch (grading logic may
    /// have changed), then rebuilds the report.
    RunManifest regrade();

    /// Re-aggregates persisted grades into fresh report files. Throws
    /// ValidationError when the run directory has no graded data.
    RunManifest rereport();

    /// Expands and filters the corpus without touching any backend;
    /// `transform` subcommand.
    std::vector<WorkItem> expand_only();

    /// expand_only plus writing variants.jsonl into the output directory.
    /// Returns the variant count; no manifest is written.
    long transform();

    const gateway::GatewayStats& subject_stats() const { return subject_->stats(); }
    const gateway::GatewayStats& judge_stats() const { return judge_gateway_->stats(); }

private:
    std::vector<WorkItem> build_items();
    void write_variants(const std::vector<WorkItem>& items);
    void write_prompts(const std::vector<WorkItem>& items);
    std::map<std::uint64_t, gateway::ModelResponse> complete_stage(
        const std::vector<WorkItem>& items, RunManifest& manifest);
    std::vector<grader::GradedResponse> grade_stage(
        const std::vector<WorkItem>& items,
        const std::map<std::uint64_t, gateway::ModelResponse>& responses, bool force,
        RunManifest& manifest);
    void report_stage(const std::vector<grader::GradedResponse>& graded,
                      const metrics::CorpusIndex& gold, RunManifest& manifest);
    void check_or_claim_run_dir(RunManifest& manifest);
    void save_manifest(const RunManifest& manifest);
    void note_failure(RunManifest& manifest, const std::string& id, const std::string& reason);

    ExperimentPlan plan_;
    prompting::PromptTemplates templates_;
    grader::JudgeTemplates judge_templates_;
    std::shared_ptr<gateway::Gateway> subject_;
    std::shared_ptr<gateway::Gateway> judge_gateway_;
    std::unique_ptr<grader::Grader> grader_;
    std::vector<QuestionRecord> corpus_;
};

}  // namespace biaseval::runner
