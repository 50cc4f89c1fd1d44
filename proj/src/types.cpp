#include "biaseval/types.hpp"

#include <algorithm>
#include <cctype>

namespace biaseval {

namespace {

// Lowercase and drop separators so "Race_x_SES", "race-x-ses" and
// "RaceXSES" all compare equal.
std::string squash(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '_' || c == '-' || c == ' ' || c == '/' || c == '.') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

[[noreturn]] void bad_enum(const char* what, std::string_view value) {
    throw std::invalid_argument(std::string("unrecognized ") + what + ": \"" +
                                std::string(value) + "\"");
}

}  // namespace

const std::vector<BiasCategory>& all_categories() {
    static const std::vector<BiasCategory> cats = {
        BiasCategory::Age,
        BiasCategory::DisabilityStatus,
        BiasCategory::GenderIdentity,
        BiasCategory::Nationality,
        BiasCategory::PhysicalAppearance,
        BiasCategory::RaceEthnicity,
        BiasCategory::Religion,
        BiasCategory::SexualOrientation,
        BiasCategory::SocioEconomicStatus,
        BiasCategory::RaceXGender,
        BiasCategory::RaceXSES,
    };
    return cats;
}

bool is_intersectional(BiasCategory c) {
    return c == BiasCategory::RaceXGender || c == BiasCategory::RaceXSES;
}

const std::vector<QuestionFormat>& all_formats() {
    static const std::vector<QuestionFormat> fmts = {
        QuestionFormat::MultipleChoice,
        QuestionFormat::FillInBlank,
        QuestionFormat::ShortAnswer,
    };
    return fmts;
}

const std::vector<StrategyKind>& all_strategies() {
    static const std::vector<StrategyKind> strats = {
        StrategyKind::Baseline,
        StrategyKind::SelfDebias,
        StrategyKind::ChainOfThought,
        StrategyKind::Composite,
    };
    return strats;
}

std::string to_string(BiasCategory c) {
    switch (c) {
        case BiasCategory::Age: return "age";
        case BiasCategory::DisabilityStatus: return "disability_status";
        case BiasCategory::GenderIdentity: return "gender_identity";
        case BiasCategory::Nationality: return "nationality";
        case BiasCategory::PhysicalAppearance: return "physical_appearance";
        case BiasCategory::RaceEthnicity: return "race_ethnicity";
        case BiasCategory::Religion: return "religion";
        case BiasCategory::SexualOrientation: return "sexual_orientation";
        case BiasCategory::SocioEconomicStatus: return "ses";
        case BiasCategory::RaceXGender: return "race_x_gender";
        case BiasCategory::RaceXSES: return "race_x_ses";
    }
    return "?";
}

std::string to_string(QuestionFormat f) {
    switch (f) {
        case QuestionFormat::MultipleChoice: return "multiple_choice";
        case QuestionFormat::FillInBlank: return "fill_in_blank";
        case QuestionFormat::ShortAnswer: return "short_answer";
    }
    return "?";
}

std::string to_string(ContextCondition c) {
    return c == ContextCondition::Ambiguous ? "ambiguous" : "disambiguated";
}

std::string to_string(QuestionPolarity p) {
    return p == QuestionPolarity::Negative ? "negative" : "non_negative";
}

std::string to_string(OptionRole r) {
    switch (r) {
        case OptionRole::Target: return "target";
        case OptionRole::NonTarget: return "non_target";
        case OptionRole::Unknown: return "unknown";
    }
    return "?";
}

std::string to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::Baseline: return "baseline";
        case StrategyKind::SelfDebias: return "self_debias";
        case StrategyKind::ChainOfThought: return "chain_of_thought";
        case StrategyKind::Composite: return "composite";
    }
    return "?";
}

std::string display_name(BiasCategory c) {
    switch (c) {
        case BiasCategory::Age: return "Age";
        case BiasCategory::DisabilityStatus: return "Disability status";
        case BiasCategory::GenderIdentity: return "Gender identity";
        case BiasCategory::Nationality: return "Nationality";
        case BiasCategory::PhysicalAppearance: return "Physical appearance";
        case BiasCategory::RaceEthnicity: return "Race ethnicity";
        case BiasCategory::Religion: return "Religion";
        case BiasCategory::SexualOrientation: return "Sexual orientation";
        case BiasCategory::SocioEconomicStatus: return "Socio-economic status";
        case BiasCategory::RaceXGender: return "Race x Gender";
        case BiasCategory::RaceXSES: return "Race x SES";
    }
    return "?";
}

std::string display_name(QuestionFormat f) {
    switch (f) {
        case QuestionFormat::MultipleChoice: return "Multiple Choice";
        case QuestionFormat::FillInBlank: return "Fill in Blank";
        case QuestionFormat::ShortAnswer: return "Short Answer";
    }
    return "?";
}

BiasCategory parse_category(std::string_view s) {
    const std::string k = squash(s);
    if (k == "age") return BiasCategory::Age;
    if (k == "disabilitystatus" || k == "disability") return BiasCategory::DisabilityStatus;
    if (k == "genderidentity" || k == "gender") return BiasCategory::GenderIdentity;
    if (k == "nationality") return BiasCategory::Nationality;
    if (k == "physicalappearance") return BiasCategory::PhysicalAppearance;
    if (k == "raceethnicity") return BiasCategory::RaceEthnicity;
    if (k == "religion") return BiasCategory::Religion;
    if (k == "sexualorientation") return BiasCategory::SexualOrientation;
    if (k == "ses" || k == "socioeconomicstatus") return BiasCategory::SocioEconomicStatus;
    if (k == "racexgender" || k == "genderbyraceethnicity") return BiasCategory::RaceXGender;
    if (k == "racexses" || k == "sesbyraceethnicity") return BiasCategory::RaceXSES;
    bad_enum("category", s);
}

QuestionFormat parse_format(std::string_view s) {
    const std::string k = squash(s);
    if (k == "multiplechoice" || k == "mc" || k == "multichoice")
        return QuestionFormat::MultipleChoice;
    if (k == "fillinblank" || k == "fillintheblank" || k == "fib")
        return QuestionFormat::FillInBlank;
    if (k == "shortanswer" || k == "sa") return QuestionFormat::ShortAnswer;
    bad_enum("format", s);
}

ContextCondition parse_condition(std::string_view s) {
    const std::string k = squash(s);
    if (k == "ambiguous" || k == "ambig" || k == "amb") return ContextCondition::Ambiguous;
    if (k == "disambiguated" || k == "disambig" || k == "dis")
        return ContextCondition::Disambiguated;
    bad_enum("condition", s);
}

QuestionPolarity parse_polarity(std::string_view s) {
    const std::string k = squash(s);
    if (k == "negative" || k == "neg") return QuestionPolarity::Negative;
    if (k == "nonnegative" || k == "nonneg" || k == "positive")
        return QuestionPolarity::NonNegative;
    bad_enum("polarity", s);
}

OptionRole parse_role(std::string_view s) {
    const std::string k = squash(s);
    if (k == "target") return OptionRole::Target;
    if (k == "nontarget") return OptionRole::NonTarget;
    if (k == "unknown") return OptionRole::Unknown;
    bad_enum("option role", s);
}

StrategyKind parse_strategy(std::string_view s) {
    const std::string k = squash(s);
    if (k == "baseline") return StrategyKind::Baseline;
    if (k == "selfdebias" || k == "selfdebiasing") return StrategyKind::SelfDebias;
    if (k == "chainofthought" || k == "cot") return StrategyKind::ChainOfThought;
    if (k == "composite") return StrategyKind::Composite;
    bad_enum("strategy", s);
}

int QuestionRecord::option_index(OptionRole role) const {
    for (const auto& opt : options) {
        if (opt.role == role) return opt.index;
    }
    throw ValidationError("record " + id + " has no option with role " + biaseval::to_string(role));
}

const AnswerOption& QuestionRecord::option(OptionRole role) const {
    for (const auto& opt : options) {
        if (opt.role == role) return opt;
    }
    throw ValidationError("record " + id + " has no option with role " + biaseval::to_string(role));
}

std::string to_string(MessageRole r) {
    return r == MessageRole::System ? "system" : "user";
}

MessageRole parse_message_role(std::string_view s) {
    const std::string k = squash(s);
    if (k == "system") return MessageRole::System;
    if (k == "user") return MessageRole::User;
    bad_enum("message role", s);
}

}  // namespace biaseval
