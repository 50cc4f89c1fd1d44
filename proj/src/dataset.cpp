#include "biaseval/dataset.hpp"

#include <array>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "biaseval/jsonl.hpp"

namespace biaseval::dataset {

namespace {

std::string field_string(const nlohmann::json& obj, const char* key, int line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw ParseError("line " + std::to_string(line) + ": missing or non-string field \"" +
                             key + "\"",
                         line);
    }
    return it->get<std::string>();
}

}  // namespace

QuestionRecord parse_record(const nlohmann::json& obj, int line) {
    if (!obj.is_object()) {
        throw ParseError("line " + std::to_string(line) + ": record is not a JSON object", line);
    }
    QuestionRecord rec;
    try {
        rec.category = parse_category(field_string(obj, "category", line));
        rec.condition = parse_condition(field_string(obj, "condition", line));
        rec.polarity = parse_polarity(field_string(obj, "polarity", line));
        rec.gold_role = parse_role(field_string(obj, "gold_role", line));
    } catch (const std::invalid_argument& e) {
        throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
    }
    rec.context = field_string(obj, "context", line);
    rec.question = field_string(obj, "question", line);
    if (obj.contains("fib_statement") && !obj["fib_statement"].is_null()) {
        rec.fib_statement = field_string(obj, "fib_statement", line);
    }
    if (obj.contains("id") && obj["id"].is_string() && !obj["id"].get<std::string>().empty()) {
        rec.id = obj["id"].get<std::string>();
    } else {
        rec.id = to_string(rec.category) + "-" + std::to_string(line);
    }

    auto opts = obj.find("options");
    if (opts == obj.end() || !opts->is_array()) {
        throw ParseError("line " + std::to_string(line) + ": missing options array", line);
    }
    int index = 0;
    for (const auto& o : *opts) {
        AnswerOption opt;
        opt.index = index++;
        opt.surface = field_string(o, "text", line);
        try {
            opt.role = parse_role(field_string(o, "role", line));
        } catch (const std::invalid_argument& e) {
            throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
        }
        rec.options.push_back(std::move(opt));
    }
    return rec;
}

nlohmann::json record_to_json(const QuestionRecord& rec) {
    nlohmann::json options = nlohmann::json::array();
    for (const AnswerOption& opt : rec.options) {
        options.push_back({{"text", opt.surface}, {"role", to_string(opt.role)}});
    }
    nlohmann::json obj = {
        {"id", rec.id},
        {"category", to_string(rec.category)},
        {"condition", to_string(rec.condition)},
        {"polarity", to_string(rec.polarity)},
        {"context", rec.context},
        {"question", rec.question},
        {"options", std::move(options)},
        {"gold_role", to_string(rec.gold_role)},
    };
    if (rec.fib_statement) obj["fib_statement"] = *rec.fib_statement;
    return obj;
}

void check_record(const QuestionRecord& rec) {
    if (rec.options.size() != 3) {
        throw ValidationError("record " + rec.id + ": expected 3 options, got " +
                              std::to_string(rec.options.size()));
    }
    int target = 0, non_target = 0, unknown = 0;
    for (const auto& opt : rec.options) {
        if (opt.surface.empty()) {
            throw ValidationError("record " + rec.id + ": option " +
                                  std::to_string(opt.index) + " has empty text");
        }
        switch (opt.role) {
            case OptionRole::Target: ++target; break;
            case OptionRole::NonTarget: ++non_target; break;
            case OptionRole::Unknown: ++unknown; break;
        }
    }
    if (target != 1 || non_target != 1 || unknown != 1) {
        throw ValidationError("record " + rec.id +
                              ": options must carry exactly one target, one non_target and "
                              "one unknown role");
    }
    if (rec.condition == ContextCondition::Ambiguous && rec.gold_role != OptionRole::Unknown) {
        throw ValidationError("record " + rec.id +
                              ": ambiguous records must have gold_role unknown");
    }
    if (rec.condition == ContextCondition::Disambiguated && rec.gold_role == OptionRole::Unknown) {
        throw ValidationError("record " + rec.id +
                              ": disambiguated records must have a target/non_target gold_role");
    }
    if (rec.fib_statement) {
        const std::string& s = *rec.fib_statement;
        size_t first = s.find("[blank]");
        if (first == std::string::npos || s.find("[blank]", first + 1) != std::string::npos) {
            throw ValidationError("record " + rec.id +
                                  ": fib_statement must contain \"[blank]\" exactly once");
        }
    }
}

std::vector<QuestionRecord> load_corpus(const std::filesystem::path& path) {
    std::vector<QuestionRecord> records;
    std::unordered_set<std::string> seen_ids;
    jsonl::for_each(path, [&](int line, const nlohmann::json& obj) {
        QuestionRecord rec = parse_record(obj, line);
        check_record(rec);
        if (!seen_ids.insert(rec.id).second) {
            throw ValidationError("duplicate record id \"" + rec.id + "\" at line " +
                                  std::to_string(line));
        }
        records.push_back(std::move(rec));
    });
    return records;
}

std::optional<std::string> derive_fill_in_blank(const std::string& question) {
    if (question.empty() || question.back() != '?') return std::nullopt;
    // Longest prefix first so "Which person" wins over a bare "Which".
    static const std::array<std::string, 3> prefixes = {"Which person", "Which of them", "Who"};
    for (const auto& prefix : prefixes) {
        if (question.size() > prefix.size() + 1 && question.compare(0, prefix.size(), prefix) == 0 &&
            question[prefix.size()] == ' ') {
            std::string rest = question.substr(prefix.size(), question.size() - prefix.size() - 1);
            return "[blank]" + rest + ".";
        }
    }
    return std::nullopt;
}

std::vector<QuestionVariant> expand_formats(const QuestionRecord& record) {
    QuestionRecord resolved = record;
    if (!resolved.fib_statement) {
        if (auto derived = derive_fill_in_blank(resolved.question)) {
            resolved.fib_statement = std::move(*derived);
        } else {
            std::cerr << "warning: record " << record.id
                      << ": cannot derive a fill-in-blank statement from \"" << record.question
                      << "\"; keeping multiple_choice and short_answer only\n";
        }
    }
    std::vector<QuestionVariant> variants;
    variants.push_back({resolved, QuestionFormat::MultipleChoice});
    if (resolved.fib_statement) {
        variants.push_back({resolved, QuestionFormat::FillInBlank});
    }
    variants.push_back({resolved, QuestionFormat::ShortAnswer});
    return variants;
}

CorpusStats validate_corpus(const std::vector<QuestionRecord>& records) {
    CorpusStats stats;
    for (const auto& rec : records) {
        auto& cat = stats.per_category[rec.category];
        if (rec.condition == ContextCondition::Ambiguous) {
            ++cat.ambiguous;
            ++stats.ambiguous_total;
        } else {
            ++cat.disambiguated;
            ++stats.disambiguated_total;
        }
        ++stats.total_records;
        ++stats.multiple_choice;
        ++stats.short_answer;
        if (rec.fib_statement || derive_fill_in_blank(rec.question)) {
            ++stats.fill_in_blank;
        }
    }
    stats.expanded_total = stats.multiple_choice + stats.fill_in_blank + stats.short_answer;
    return stats;
}

const PaperCounts& PaperCounts::reference() {
    static const PaperCounts counts = [] {
        PaperCounts c;
        c.ambiguous_per_category = {
            {BiasCategory::Age, 1840},
            {BiasCategory::DisabilityStatus, 778},
            {BiasCategory::GenderIdentity, 2836},
            {BiasCategory::Nationality, 1540},
            {BiasCategory::PhysicalAppearance, 788},
            {BiasCategory::RaceEthnicity, 3440},
            {BiasCategory::Religion, 600},
            {BiasCategory::SexualOrientation, 432},
            {BiasCategory::SocioEconomicStatus, 3432},
            {BiasCategory::RaceXGender, 7980},
            {BiasCategory::RaceXSES, 5580},
        };
        for (const auto& [cat, n] : c.ambiguous_per_category) c.ambiguous_total += n;
        c.both_conditions = 2 * c.ambiguous_total;
        c.format_expanded = 3 * c.both_conditions;
        return c;
    }();
    return counts;
}

CountsCheck check_paper_counts(const CorpusStats& stats) {
    const PaperCounts& ref = PaperCounts::reference();
    CountsCheck check;
    for (BiasCategory cat : all_categories()) {
        CountsCheckLine line;
        line.name = display_name(cat) + " (ambiguous)";
        line.expected = ref.ambiguous_per_category.at(cat);
        auto it = stats.per_category.find(cat);
        line.actual = it == stats.per_category.end() ? 0 : it->second.ambiguous;
        check.lines.push_back(std::move(line));
    }
    check.lines.push_back({"Ambiguous total", ref.ambiguous_total, stats.ambiguous_total});
    check.lines.push_back({"Both conditions", ref.both_conditions, stats.total_records});
    check.lines.push_back({"Format-expanded", ref.format_expanded, stats.expanded_total});
    return check;
}

bool CountsCheck::passed() const {
    for (const auto& line : lines) {
        if (!line.ok()) return false;
    }
    return true;
}

std::string CountsCheck::to_table() const {
    std::ostringstream out;
    out << "check                           expected    actual  status\n";
    out << "------------------------------------------------------------\n";
    for (const auto& line : lines) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-30s %9ld %9ld  %s\n", line.name.c_str(),
                      line.expected, line.actual, line.ok() ? "ok" : "MISMATCH");
        out << buf;
    }
    out << (passed() ? "all counts match\n" : "count mismatches found\n");
    return out.str();
}

nlohmann::json CorpusStats::to_json() const {
    nlohmann::json per_cat = nlohmann::json::object();
    for (const auto& [cat, counts] : per_category) {
        per_cat[to_string(cat)] = {
            {"ambiguous", counts.ambiguous},
            {"disambiguated", counts.disambiguated},
            {"total", counts.total()},
        };
    }
    return {
        {"per_category", per_cat},
        {"ambiguous_total", ambiguous_total},
        {"disambiguated_total", disambiguated_total},
        {"total_records", total_records},
        {"expanded",
         {
             {"multiple_choice", multiple_choice},
             {"fill_in_blank", fill_in_blank},
             {"short_answer", short_answer},
             {"total", expanded_total},
         }},
    };
}

std::string CorpusStats::to_table() const {
    std::ostringstream out;
    out << "category                       ambiguous  disambig     total\n";
    out << "------------------------------------------------------------\n";
    for (const auto& [cat, counts] : per_category) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-30s %9ld %9ld %9ld\n", display_name(cat).c_str(),
                      counts.ambiguous, counts.disambiguated, counts.total());
        out << buf;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-30s %9ld %9ld %9ld\n", "total", ambiguous_total,
                  disambiguated_total, total_records);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "expanded variants: multiple_choice %ld, fill_in_blank %ld, short_answer %ld, "
                  "total %ld\n",
                  multiple_choice, fill_in_blank, short_answer, expanded_total);
    out << buf;
    return out.str();
}

}  // namespace biaseval::dataset
