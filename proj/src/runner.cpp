#include "biaseval/runner.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace biaseval::runner {

namespace {

constexpr std::size_t kBatchChunk = 64;  // append granularity for crash-resume
constexpr std::size_t kMaxFailureNotes = 20;

nlohmann::json backend_to_json(const gateway::BackendConfig& b) {
    return {
        {"kind", gateway::to_string(b.kind)},
        {"endpoint", b.endpoint},
        {"model", b.model},
        {"temperature", b.temperature},
        {"max_tokens", b.max_tokens},
        {"timeout_seconds", b.timeout_seconds},
        {"max_retries", b.max_retries},
        {"parallelism", b.parallelism},
        {"fixtures", b.fixture_path.string()},
        {"api_key_env", b.api_key_env},
        {"retry_base_ms", b.retry_base_ms},
    };
}

gateway::BackendConfig backend_from_json(const nlohmann::json& j) {
    gateway::BackendConfig b;
    b.kind = gateway::parse_backend_kind(j.value("kind", "replay"));
    b.endpoint = j.value("endpoint", b.endpoint);
    b.model = j.value("model", b.model);
    b.temperature = j.value("temperature", b.temperature);
    b.max_tokens = j.value("max_tokens", b.max_tokens);
    b.timeout_seconds = j.value("timeout_seconds", b.timeout_seconds);
    b.max_retries = j.value("max_retries", b.max_retries);
    b.parallelism = j.value("parallelism", b.parallelism);
    b.fixture_path = j.value("fixtures", std::string());
    b.api_key_env = j.value("api_key_env", b.api_key_env);
    b.retry_base_ms = j.value("retry_base_ms", b.retry_base_ms);
    return b;
}

nlohmann::json response_to_json(const gateway::ModelResponse& r) {
    nlohmann::json obj = {
        {"question_id", r.question_id},
        {"format", to_string(r.format)},
        {"strategy", to_string(r.strategy)},
        {"fingerprint", gateway::fingerprint_hex(r.fingerprint)},
        {"model", r.model},
        {"raw_text", r.raw_text},
        {"wall_time_ms", r.wall_time_ms},
    };
    if (r.error) obj["error"] = *r.error;
    return obj;
}

gateway::ModelResponse response_from_json(const nlohmann::json& obj) {
    gateway::ModelResponse r;
    r.question_id = obj.at("question_id").get<std::string>();
    r.format = parse_format(obj.at("format").get<std::string>());
    r.strategy = parse_strategy(obj.at("strategy").get<std::string>());
    r.fingerprint = gateway::parse_fingerprint_hex(obj.at("fingerprint").get<std::string>());
    r.model = obj.value("model", std::string());
    r.raw_text = obj.value("raw_text", std::string());
    r.wall_time_ms = obj.value("wall_time_ms", 0L);
    if (obj.contains("error")) r.error = obj["error"].get<std::string>();
    return r;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out << content;
}

void merge_config(nlohmann::json& base, const nlohmann::json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (base.contains(it.key())) {
            merge_config(base[it.key()], it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

}  // namespace

nlohmann::json default_config() {
    grader::GraderConfig grading;
    nlohmann::json subject = backend_to_json(gateway::BackendConfig{});
    subject["fixtures"] = "data/fixtures/subject.jsonl";
    nlohmann::json judge = backend_to_json(gateway::BackendConfig{});
    judge["fixtures"] = "data/fixtures/judge.jsonl";
    return {
        {"corpus", "data/corpus_subset.jsonl"},
        {"templates", "templates"},
        {"out", "runs/default"},
        {"categories", nlohmann::json::array()},
        {"formats", nlohmann::json::array()},
        {"conditions", nlohmann::json::array()},
        {"strategies", nlohmann::json::array()},
        {"subject", std::move(subject)},
        {"judge", std::move(judge)},
        {"unknown_synonyms", grading.unknown_synonyms},
    };
}

nlohmann::json merged_config(const nlohmann::json& overlay) {
    nlohmann::json config = default_config();
    merge_config(config, overlay);
    return config;
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& config) {
    ExperimentPlan p;
    p.corpus_path = config.value("corpus", std::string());
    p.template_dir = config.value("templates", std::string("templates"));
    p.out_dir = config.value("out", std::string());
    for (const auto& s : config.value("categories", nlohmann::json::array())) {
        p.categories.push_back(parse_category(s.get<std::string>()));
    }
    for (const auto& s : config.value("formats", nlohmann::json::array())) {
        p.formats.push_back(parse_format(s.get<std::string>()));
    }
    for (const auto& s : config.value("conditions", nlohmann::json::array())) {
        p.conditions.push_back(parse_condition(s.get<std::string>()));
    }
    for (const auto& s : config.value("strategies", nlohmann::json::array())) {
        p.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (config.contains("subject")) p.subject = backend_from_json(config["subject"]);
    if (config.contains("judge")) p.judge = backend_from_json(config["judge"]);
    if (config.contains("unknown_synonyms")) {
        p.grading.unknown_synonyms.clear();
        for (const auto& s : config["unknown_synonyms"]) {
            p.grading.unknown_synonyms.push_back(s.get<std::string>());
        }
    }
    return p;
}

nlohmann::json ExperimentPlan::to_json() const {
    auto names = [](const auto& values) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : values) arr.push_back(to_string(v));
        return arr;
    };
    return {
        {"corpus", corpus_path.string()},
        {"templates", template_dir.string()},
        {"out", out_dir.string()},
        {"categories", names(categories)},
        {"formats", names(formats)},
        {"conditions", names(conditions)},
        {"strategies", names(strategies)},
        {"subject", backend_to_json(subject)},
        {"judge", backend_to_json(judge)},
        {"unknown_synonyms", grading.unknown_synonyms},
    };
}

void ExperimentPlan::validate() const {
    if (corpus_path.empty()) {
        throw ValidationError("plan: corpus path is not set");
    }
    if (!std::filesystem::exists(corpus_path)) {
        throw ValidationError("plan: corpus file not found: " + corpus_path.string());
    }
    if (!std::filesystem::exists(template_dir)) {
        throw ValidationError("plan: template directory not found: " + template_dir.string());
    }
    if (out_dir.empty()) {
        throw ValidationError("plan: output directory is not set");
    }
    subject.validate();
    judge.validate();
    if (grading.unknown_synonyms.empty()) {
        throw ValidationError("plan: the unknown-synonym set must not be empty");
    }
}

bool ExperimentPlan::wants(BiasCategory c) const {
    return categories.empty() ||
           std::find(categories.begin(), categories.end(), c) != categories.end();
}

bool ExperimentPlan::wants(QuestionFormat f) const {
    return formats.empty() || std::find(formats.begin(), formats.end(), f) != formats.end();
}

bool ExperimentPlan::wants(ContextCondition c) const {
    return conditions.empty() ||
           std::find(conditions.begin(), conditions.end(), c) != conditions.end();
}

std::vector<StrategyKind> ExperimentPlan::effective_strategies() const {
    if (!strategies.empty()) return strategies;
    return all_strategies();
}

std::string plan_hash(const ExperimentPlan& plan) {
    // Only result-determining inputs contribute; see header.
    nlohmann::json full = plan.to_json();
    nlohmann::json semantic = {
        {"categories", full["categories"]},
        {"formats", full["formats"]},
        {"conditions", full["conditions"]},
        {"strategies", full["strategies"]},
        {"subject",
         {{"model", plan.subject.model},
          {"temperature", plan.subject.temperature},
          {"max_tokens", plan.subject.max_tokens}}},
        {"judge",
         {{"model", plan.judge.model},
          {"temperature", plan.judge.temperature},
          {"max_tokens", plan.judge.max_tokens}}},
        {"unknown_synonyms", plan.grading.unknown_synonyms},
    };
    std::string dump = semantic.dump();
    std::uint64_t h = gateway::fnv1a(dump.data(), dump.size());

    auto add_file = [&](const std::filesystem::path& path) {
        std::string bytes = prompting::read_text_file(path);
        h = gateway::fnv1a(bytes.data(), bytes.size(), h);
    };
    add_file(plan.corpus_path);
    for (const char* name : {"composite_examples.txt", "composite_instruction.txt",
                             "self_debias.txt", "cot.txt", "judge_fill_blank.txt",
                             "judge_short_answer.txt"}) {
        add_file(plan.template_dir / name);
    }
    return gateway::fingerprint_hex(h);
}

nlohmann::json RunManifest::to_json() const {
    return {
        {"plan_hash", plan_hash},
        {"stages_completed", stages_completed},
        {"counts",
         {
             {"variants", variants},
             {"prompts", prompts},
             {"responses_ok", responses_ok},
             {"responses_failed", responses_failed},
             {"graded_ok", graded_ok},
             {"graded_failed", graded_failed},
             {"report_cells", report_cells},
         }},
        {"failures", failures},
    };
}

RunManifest RunManifest::from_json(const nlohmann::json& obj) {
    RunManifest m;
    m.plan_hash = obj.value("plan_hash", std::string());
    for (const auto& s : obj.value("stages_completed", nlohmann::json::array())) {
        m.stages_completed.push_back(s.get<std::string>());
    }
    nlohmann::json counts = obj.value("counts", nlohmann::json::object());
    m.variants = counts.value("variants", 0L);
    m.prompts = counts.value("prompts", 0L);
    m.responses_ok = counts.value("responses_ok", 0L);
    m.responses_failed = counts.value("responses_failed", 0L);
    m.graded_ok = counts.value("graded_ok", 0L);
    m.graded_failed = counts.value("graded_failed", 0L);
    m.report_cells = counts.value("report_cells", 0L);
    for (const auto& s : obj.value("failures", nlohmann::json::array())) {
        m.failures.push_back(s.get<std::string>());
    }
    return m;
}

std::string WorkItem::key() const {
    return variant.id() + "/" + to_string(variant.format) + "/" + to_string(strategy);
}

Runner::Runner(ExperimentPlan plan, std::shared_ptr<gateway::ChatTransport> subject_transport,
               std::shared_ptr<gateway::ChatTransport> judge_transport)
    : plan_(std::move(plan)),
      templates_(prompting::PromptTemplates::load(plan_.template_dir)),
      judge_templates_(grader::JudgeTemplates::load(plan_.template_dir)) {
    plan_.validate();
    subject_ = std::make_shared<gateway::Gateway>(plan_.subject, std::move(subject_transport));
    judge_gateway_ = std::make_shared<gateway::Gateway>(plan_.judge, std::move(judge_transport));
    grader_ = std::make_unique<grader::Grader>(judge_templates_, plan_.grading, judge_gateway_);
}

std::vector<WorkItem> Runner::build_items() {
    if (corpus_.empty()) {
        corpus_ = dataset::load_corpus(plan_.corpus_path);
    }
    std::vector<WorkItem> items;
    for (const QuestionRecord& rec : corpus_) {
        if (!plan_.wants(rec.category) || !plan_.wants(rec.condition)) continue;
        for (const QuestionVariant& variant : dataset::expand_formats(rec)) {
            if (!plan_.wants(variant.format)) continue;
            for (StrategyKind strategy : plan_.effective_strategies()) {
                WorkItem item;
                item.variant = variant;
                item.strategy = strategy;
                item.prompt = prompting::build_strategy_prompt(templates_, variant, strategy);
                item.fingerprint = gateway::fingerprint_request(
                    item.prompt.messages, plan_.subject.model, plan_.subject.temperature,
                    plan_.subject.max_tokens);
                items.push_back(std::move(item));
            }
        }
    }
    return items;
}

std::vector<WorkItem> Runner::expand_only() {
    return build_items();
}

long Runner::transform() {
    std::filesystem::create_directories(plan_.out_dir);
    std::vector<WorkItem> items = build_items();
    write_variants(items);
    std::set<std::string> unique_variants;
    for (const WorkItem& item : items) {
        unique_variants.insert(item.variant.id() + "/" + to_string(item.variant.format));
    }
    return static_cast<long>(unique_variants.size());
}

void Runner::write_variants(const std::vector<WorkItem>& items) {
    jsonl::Writer out(plan_.out_dir / "variants.jsonl", /*truncate=*/true);
    std::set<std::string> seen;
    for (const WorkItem& item : items) {
        std::string key = item.variant.id() + "/" + to_string(item.variant.format);
        if (!seen.insert(key).second) continue;
        nlohmann::json row = dataset::record_to_json(item.variant.record);
        row["format"] = to_string(item.variant.format);
        out.write(row);
    }
}

void Runner::write_prompts(const std::vector<WorkItem>& items) {
    jsonl::Writer out(plan_.out_dir / "prompts.jsonl", /*truncate=*/true);
    for (const WorkItem& item : items) {
        nlohmann::json messages = nlohmann::json::array();
        for (const Message& m : item.prompt.messages) {
            messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        out.write({
            {"question_id", item.variant.id()},
            {"format", to_string(item.variant.format)},
            {"strategy", to_string(item.strategy)},
            {"fingerprint", gateway::fingerprint_hex(item.fingerprint)},
            {"messages", std::move(messages)},
        });
    }
}

void Runner::note_failure(RunManifest& manifest, const std::string& id,
                          const std::string& reason) {
    if (manifest.failures.size() < kMaxFailureNotes) {
        manifest.failures.push_back(id + ": " + reason);
    }
}

std::map<std::uint64_t, gateway::ModelResponse> Runner::complete_stage(
    const std::vector<WorkItem>& items, RunManifest& manifest) {
    const auto path = plan_.out_dir / "responses.jsonl";
    std::map<std::uint64_t, gateway::ModelResponse> have;
    if (std::filesystem::exists(path)) {
        jsonl::for_each(
            path,
            [&](int, const nlohmann::json& obj) {
                gateway::ModelResponse r = response_from_json(obj);
                have[r.fingerprint] = std::move(r);  // last write wins
            },
            /*tolerate_torn_tail=*/true);
    }

    // Pending = fingerprints without a good response, one representative
    // prompt each (identical prompts share one completion).
    std::vector<const WorkItem*> pending;
    std::set<std::uint64_t> queued;
    for (const WorkItem& item : items) {
        auto it = have.find(item.fingerprint);
        if (it != have.end() && it->second.ok()) continue;
        if (queued.insert(item.fingerprint).second) pending.push_back(&item);
    }

    if (!pending.empty()) {
        jsonl::Writer out(path);
        for (std::size_t base = 0; base < pending.size(); base += kBatchChunk) {
            std::size_t n = std::min(kBatchChunk, pending.size() - base);
            std::vector<RenderedPrompt> prompts;
            prompts.reserve(n);
            for (std::size_t i = 0; i < n; ++i) prompts.push_back(pending[base + i]->prompt);
            std::vector<gateway::ModelResponse> results = subject_->complete_batch(prompts);
            for (gateway::ModelResponse& r : results) {
                out.write(response_to_json(r));
                have[r.fingerprint] = std::move(r);
            }
        }
    }

    for (const WorkItem& item : items) {
        auto it = have.find(item.fingerprint);
        if (it != have.end() && it->second.ok()) {
            manifest.responses_ok += 1;
        } else {
            manifest.responses_failed += 1;
            note_failure(manifest, item.key(),
                         it == have.end() ? "no response" : it->second.error.value_or("failed"));
        }
    }
    return have;
}

std::vector<grader::GradedResponse> Runner::grade_stage(
    const std::vector<WorkItem>& items,
    const std::map<std::uint64_t, gateway::ModelResponse>& responses, bool force,
    RunManifest& manifest) {
    const auto path = plan_.out_dir / "graded.jsonl";
    std::map<std::string, grader::GradedResponse> have;
    if (!force && std::filesystem::exists(path)) {
        jsonl::for_each(
            path,
            [&](int, const nlohmann::json& obj) {
                grader::GradedResponse g = grader::graded_from_json(obj);
                std::string key =
                    g.question_id + "/" + to_string(g.format) + "/" + to_string(g.strategy);
                have[key] = std::move(g);
            },
            /*tolerate_torn_tail=*/true);
    }

    jsonl::Writer out(path, /*truncate=*/force);
    std::vector<grader::GradedResponse> graded;
    graded.reserve(items.size());
    for (const WorkItem& item : items) {
        auto rit = responses.find(item.fingerprint);
        if (rit == responses.end() || !rit->second.ok()) {
            continue;  // already counted as a response failure
        }
        auto hit = have.find(item.key());
        if (hit != have.end() && !hit->second.error) {
            graded.push_back(hit->second);
            manifest.graded_ok += 1;
            continue;
        }
        grader::GradedResponse g = grader_->grade(item.variant, rit->second);
        g.strategy = item.strategy;
        out.write(grader::to_json(g));
        if (g.error) {
            manifest.graded_failed += 1;
            note_failure(manifest, item.key(), *g.error);
        } else {
            manifest.graded_ok += 1;
        }
        graded.push_back(std::move(g));
    }
    return graded;
}

void Runner::report_stage(const std::vector<grader::GradedResponse>& graded,
                          const metrics::CorpusIndex& gold, RunManifest& manifest) {
    metrics::BiasReport report = metrics::aggregate(graded, gold);
    manifest.report_cells = static_cast<long>(report.cells.size());
    write_text_file(plan_.out_dir / "report.csv", metrics::to_csv(report));
    write_text_file(plan_.out_dir / "report.md", metrics::to_markdown(report));
}

void Runner::check_or_claim_run_dir(RunManifest& manifest) {
    std::filesystem::create_directories(plan_.out_dir);
    std::string hash = plan_hash(plan_);
    const auto path = plan_.out_dir / "manifest.json";
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        nlohmann::json obj;
        in >> obj;
        RunManifest existing = RunManifest::from_json(obj);
        if (existing.plan_hash != hash) {
            throw ValidationError(
                "run directory " + plan_.out_dir.string() +
                " belongs to a different plan (hash " + existing.plan_hash + " vs " + hash +
                "); use a fresh --out directory");
        }
    }
    manifest.plan_hash = hash;
}

void Runner::save_manifest(const RunManifest& manifest) {
    write_text_file(plan_.out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
}

RunManifest Runner::run() {
    RunManifest manifest;
    check_or_claim_run_dir(manifest);

    std::vector<WorkItem> items = build_items();
    std::set<std::string> unique_variants;
    for (const WorkItem& item : items) {
        unique_variants.insert(item.variant.id() + "/" + to_string(item.variant.format));
    }
    manifest.variants = static_cast<long>(unique_variants.size());
    manifest.prompts = static_cast<long>(items.size());
    write_variants(items);
    write_prompts(items);
    manifest.stages_completed = {"expand", "prompt"};
    save_manifest(manifest);

    auto responses = complete_stage(items, manifest);
    manifest.stages_completed.push_back("complete");
    save_manifest(manifest);

    auto graded = grade_stage(items, responses, /*force=*/false, manifest);
    manifest.stages_completed.push_back("grade");
    save_manifest(manifest);

    report_stage(graded, metrics::build_index(corpus_), manifest);
    manifest.stages_completed.push_back("report");
    save_manifest(manifest);
    return manifest;
}

RunManifest Runner::regrade() {
    RunManifest manifest;
    check_or_claim_run_dir(manifest);

    const auto responses_path = plan_.out_dir / "responses.jsonl";
    if (!std::filesystem::exists(responses_path)) {
        throw ValidationError("no persisted responses in " + plan_.out_dir.string() +
                              "; run the pipeline first");
    }
    std::vector<WorkItem> items = build_items();
    manifest.prompts = static_cast<long>(items.size());

    std::map<std::uint64_t, gateway::ModelResponse> responses;
    jsonl::for_each(
        responses_path,
        [&](int, const nlohmann::json& obj) {
            gateway::ModelResponse r = response_from_json(obj);
            responses[r.fingerprint] = std::move(r);
        },
        /*tolerate_torn_tail=*/true);
    for (const WorkItem& item : items) {
        auto it = responses.find(item.fingerprint);
        if (it != responses.end() && it->second.ok()) {
            manifest.responses_ok += 1;
        } else {
            manifest.responses_failed += 1;
            note_failure(manifest, item.key(), "no persisted response");
        }
    }

    auto graded = grade_stage(items, responses, /*force=*/true, manifest);
    manifest.stages_completed = {"grade"};
    save_manifest(manifest);

    report_stage(graded, metrics::build_index(corpus_), manifest);
    manifest.stages_completed.push_back("report");
    save_manifest(manifest);
    return manifest;
}

RunManifest Runner::rereport() {
    RunManifest manifest;
    check_or_claim_run_dir(manifest);

    const auto path = plan_.out_dir / "graded.jsonl";
    if (!std::filesystem::exists(path)) {
        throw ValidationError("no graded data in " + plan_.out_dir.string() +
                              "; run the pipeline first");
    }
    std::map<std::string, grader::GradedResponse> have;
    jsonl::for_each(
        path,
        [&](int, const nlohmann::json& obj) {
            grader::GradedResponse g = grader::graded_from_json(obj);
            std::string key =
                g.question_id + "/" + to_string(g.format) + "/" + to_string(g.strategy);
            have[key] = std::move(g);
        },
        /*tolerate_torn_tail=*/true);
    if (have.empty()) {
        throw ValidationError("graded.jsonl in " + plan_.out_dir.string() + " is empty");
    }
    std::vector<grader::GradedResponse> graded;
    graded.reserve(have.size());
    for (auto& [key, g] : have) {
        (void)key;
        manifest.graded_ok += g.error ? 0 : 1;
        manifest.graded_failed += g.error ? 1 : 0;
        graded.push_back(std::move(g));
    }

    if (corpus_.empty()) corpus_ = dataset::load_corpus(plan_.corpus_path);
    report_stage(graded, metrics::build_index(corpus_), manifest);
    manifest.stages_completed = {"report"};
    save_manifest(manifest);
    return manifest;
}

}  // namespace biaseval::runner
