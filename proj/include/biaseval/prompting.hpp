#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "biaseval/types.hpp"

/// Prompt construction: renders a question variant as user-visible text and
/// wraps it in the message sequence for each debiasing strategy. All
/// instruction text ships in the template directory so prompts stay versioned
/// next to the code instead of inside it.
namespace biaseval::prompting {

/// Reads a whole UTF-8 text file. Throws ValidationError if unreadable.
std::string read_text_file(const std::filesystem::path& path);

/// Splits template text into blocks on lines consisting of exactly "---".
/// Leading/trailing blank lines are trimmed from each block and blocks that
/// end up empty are dropped.
std::vector<std::string> split_blocks(const std::string& text);

/// The shipped instruction texts. `composite_examples` holds the eight
/// in-context example blocks (alternating ambiguous/disambiguated) used by
/// the composite strategy; the loader rejects any other count.
struct PromptTemplates {
    std::vector<std::string> composite_examples;
    std::string composite_instruction;  // ends with "Context and Question:"
    std::string self_debias;
    std::string cot;

    static PromptTemplates load(const std::filesystem::path& dir);
};

/// Renders the text a subject model sees for one variant. Context and
/// question flow as one paragraph; multiple-choice options get one
/// "(A) ..." line each, in record order.
///
///   MultipleChoice: "<context> <question>\n(A) ...\n(B) ...\n(C) ..."
///   FillInBlank:    "<context> <fib_statement>"
///   ShortAnswer:    "<context> <question>"
///
/// Throws ValidationError for a FillInBlank variant without a statement.
std::string render_question(const QuestionVariant& variant);

/// Letter label for a multiple-choice option index: "(A)", "(B)", "(C)".
std::string option_letter(int index);

/// The composite strategy prompt: eight System example messages followed by
/// one User message holding the instruction block plus the rendered
/// question. Always 9 messages.
RenderedPrompt build_composite_prompt(const PromptTemplates& templates,
                                      const QuestionVariant& variant);

/// Message sequence for (variant, strategy):
///   Baseline        [User(question)]
///   SelfDebias      [System(self_debias), User(question)]
///   ChainOfThought  [System(cot), User(question)]
///   Composite       delegates to build_composite_prompt
/// The rendered question text always appears verbatim in the final User
/// message, whatever the strategy.
RenderedPrompt build_strategy_prompt(const PromptTemplates& templates,
                                     const QuestionVariant& variant,
                                     StrategyKind strategy);

}  // namespace biaseval::prompting
