#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// Core domain types shared by every stage of the harness: question records,
/// answer options, prompt messages, and the enumerations that key reports.
namespace biaseval {

enum class BiasCategory {
    Age,
    DisabilityStatus,
    GenderIdentity,
    Nationality,
    PhysicalAppearance,
    RaceEthnicity,
    Religion,
    SexualOrientation,
    SocioEconomicStatus,
    RaceXGender,
    RaceXSES,
};

inline constexpr int kBiasCategoryCount = 11;

/// All categories in canonical report order (individual groups first, then
/// the two intersectional ones).
const std::vector<BiasCategory>& all_categories();

/// True for RaceXGender and RaceXSES.
bool is_intersectional(BiasCategory c);

enum class QuestionFormat {
    MultipleChoice,
    FillInBlank,
    ShortAnswer,
};

inline constexpr int kQuestionFormatCount = 3;

const std::vector<QuestionFormat>& all_formats();

enum class ContextCondition {
    Ambiguous,
    Disambiguated,
};

enum class QuestionPolarity {
    Negative,
    NonNegative,
};

enum class OptionRole {
    Target,
    NonTarget,
    Unknown,
};

enum class StrategyKind {
    Baseline,
    SelfDebias,
    ChainOfThought,
    Composite,
};

inline constexpr int kStrategyCount = 4;

const std::vector<StrategyKind>& all_strategies();

// Canonical snake_case names used in CLI flags, config files and report keys.
std::string to_string(BiasCategory c);
std::string to_string(QuestionFormat f);
std::string to_string(ContextCondition c);
std::string to_string(QuestionPolarity p);
std::string to_string(OptionRole r);
std::string to_string(StrategyKind s);

/// Human-readable label for report tables ("Disability status", "Race x SES").
std::string display_name(BiasCategory c);
std::string display_name(QuestionFormat f);

// Lenient parsers: case-insensitive, tolerate the upstream BBQ spellings
// ("Race_ethnicity", "ambig", "nonneg", ...). Throw std::invalid_argument
// on unrecognized input.
BiasCategory parse_category(std::string_view s);
QuestionFormat parse_format(std::string_view s);
ContextCondition parse_condition(std::string_view s);
QuestionPolarity parse_polarity(std::string_view s);
OptionRole parse_role(std::string_view s);
StrategyKind parse_strategy(std::string_view s);

struct AnswerOption {
    int index = 0;           // 0-based position within the record
    std::string surface;     // display text shown to the model
    OptionRole role = OptionRole::Unknown;
};

/// One scenario: a context, an interrogative question, and three options
/// (target, non-target, unknown) with a known gold role.
struct QuestionRecord {
    std::string id;
    BiasCategory category = BiasCategory::Age;
    ContextCondition condition = ContextCondition::Ambiguous;
    QuestionPolarity polarity = QuestionPolarity::Negative;
    std::string context;
    std::string question;                      // interrogative form, ends with '?'
    std::optional<std::string> fib_statement;  // declarative template with "[blank]"
    std::vector<AnswerOption> options;         // exactly 3, one per role
    OptionRole gold_role = OptionRole::Unknown;

    /// Index of the option carrying `role`. Throws if absent (violated invariant).
    int option_index(OptionRole role) const;
    const AnswerOption& option(OptionRole role) const;
};

/// A record rendered for one question format. `record.fib_statement` is
/// resolved (authored or derived) before a FillInBlank variant is built.
struct QuestionVariant {
    QuestionRecord record;
    QuestionFormat format = QuestionFormat::MultipleChoice;

    const std::string& id() const { return record.id; }
};

enum class MessageRole {
    System,
    User,
};

struct Message {
    MessageRole role = MessageRole::User;
    std::string content;
};

/// Ordered message sequence for one (variant, strategy) pair. The last
/// message always has role User.
struct RenderedPrompt {
    std::string question_id;
    QuestionFormat format = QuestionFormat::MultipleChoice;
    StrategyKind strategy = StrategyKind::Baseline;
    std::vector<Message> messages;
};

std::string to_string(MessageRole r);
MessageRole parse_message_role(std::string_view s);

/// Thrown when an input file or record violates the documented schema.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown for malformed input lines; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line)
        : std::runtime_error(msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace biaseval
