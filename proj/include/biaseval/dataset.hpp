#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaseval/types.hpp"

/// Corpus ingestion and expansion: loads BBQ-style JSONL records, derives the
/// open-ended question formats, and checks corpus shape against the published
/// per-category counts.
namespace biaseval::dataset {

/// Counts for a loaded corpus, before and after format expansion.
struct CorpusStats {
    struct CategoryCount {
        long ambiguous = 0;
        long disambiguated = 0;
        long total() const { return ambiguous + disambiguated; }
    };

    std::map<BiasCategory, CategoryCount> per_category;
    long ambiguous_total = 0;
    long disambiguated_total = 0;
    long total_records = 0;

    // Expanded variant counts per format. fill_in_blank may be lower than the
    // others when a statement is neither authored nor derivable.
    long multiple_choice = 0;
    long fill_in_blank = 0;
    long short_answer = 0;
    long expanded_total = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// One line of a counts check: expected vs actual for a named quantity.
struct CountsCheckLine {
    std::string name;
    long expected = 0;
    long actual = 0;
    bool ok() const { return expected == actual; }
};

struct CountsCheck {
    std::vector<CountsCheckLine> lines;
    bool passed() const;
    std::string to_table() const;
};

/// The published per-category ambiguous record counts for the full upstream
/// corpus, plus the derived totals (each record appears under both
/// conditions; each of those expands across the three formats).
struct PaperCounts {
    std::map<BiasCategory, long> ambiguous_per_category;
    long ambiguous_total = 0;      // 29,246
    long both_conditions = 0;      // 58,492
    long format_expanded = 0;      // 175,476
    static const PaperCounts& reference();
};

/// Reads a JSONL corpus. Each line must carry {category, condition, polarity,
/// context, question, options[3], gold_role} and may carry {id, fib_statement}.
/// Missing ids are synthesized as "<category>-<line number>".
///
/// Throws ParseError (with line number) on malformed lines and
/// ValidationError on duplicate ids or option-role violations.
std::vector<QuestionRecord> load_corpus(const std::filesystem::path& path);

/// Parses a single record object; `line` is used for error messages and id
/// synthesis.
QuestionRecord parse_record(const nlohmann::json& obj, int line);

/// Serializes a record back to the corpus schema; parse_record(record_to_json(r))
/// round-trips.
nlohmann::json record_to_json(const QuestionRecord& rec);

/// Checks a record against the schema invariants (3 options with one of each
/// role, ambiguous gold is unknown, "[blank]" appears exactly once).
void check_record(const QuestionRecord& rec);

/// Rewrites an interrogative question as a declarative "[blank]" statement:
/// "Who was not comfortable using the phone?" becomes
/// "[blank] was not comfortable using the phone."
///
/// Only the prefixes "Who", "Which person" and "Which of them" are handled;
/// anything else returns nullopt so the caller can fall back to the two
/// formats that need no statement.
std::optional<std::string> derive_fill_in_blank(const std::string& question);

/// Expands a record into its renderable format variants: MultipleChoice and
/// ShortAnswer always, FillInBlank when a statement is authored or derivable.
/// A failed derivation logs one warning to stderr and drops only that format.
std::vector<QuestionVariant> expand_formats(const QuestionRecord& record);

/// Counts base records and expanded variants.
CorpusStats validate_corpus(const std::vector<QuestionRecord>& records);

/// Compares the corpus against the published counts (per-category ambiguous
/// counts, ambiguous total, both-condition total, format-expanded total).
CountsCheck check_paper_counts(const CorpusStats& stats);

}  // namespace biaseval::dataset
