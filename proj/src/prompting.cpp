#include "biaseval/prompting.hpp"

#include <fstream>
#include <sstream>

namespace biaseval::prompting {

namespace {

constexpr int kCompositeExampleCount = 8;

// Strips leading and trailing blank lines (and a trailing newline) so block
// boundaries don't depend on how the editor saved the file.
std::string trim_blank_lines(const std::string& s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && (s[begin] == '\n' || s[begin] == '\r')) ++begin;
    while (end > begin && (s[end - 1] == '\n' || s[end - 1] == '\r')) --end;
    return s.substr(begin, end - begin);
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read template file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    std::string current;
    std::istringstream in(text);
    std::string line;
    auto flush = [&] {
        std::string block = trim_blank_lines(current);
        if (!block.empty()) blocks.push_back(std::move(block));
        current.clear();
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "---") {
            flush();
        } else {
            current += line;
            current += '\n';
        }
    }
    flush();
    return blocks;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.composite_examples = split_blocks(read_text_file(dir / "composite_examples.txt"));
    if (static_cast<int>(t.composite_examples.size()) != kCompositeExampleCount) {
        throw ValidationError("composite_examples.txt: expected " +
                              std::to_string(kCompositeExampleCount) + " blocks, found " +
                              std::to_string(t.composite_examples.size()));
    }
    t.composite_instruction = trim_blank_lines(read_text_file(dir / "composite_instruction.txt"));
    t.self_debias = trim_blank_lines(read_text_file(dir / "self_debias.txt"));
    t.cot = trim_blank_lines(read_text_file(dir / "cot.txt"));
    if (t.composite_instruction.empty() || t.self_debias.empty() || t.cot.empty()) {
        throw ValidationError("template directory " + dir.string() +
                              " contains an empty instruction file");
    }
    return t;
}

std::string option_letter(int index) {
    static const char* letters[] = {"(A)", "(B)", "(C)"};
    if (index < 0 || index > 2) {
        throw std::out_of_range("option index out of range: " + std::to_string(index));
    }
    return letters[index];
}

std::string render_question(const QuestionVariant& variant) {
    const QuestionRecord& rec = variant.record;
    switch (variant.format) {
        case QuestionFormat::MultipleChoice: {
            std::string out = rec.context + " " + rec.question;
            for (const AnswerOption& opt : rec.options) {
                out += "\n" + option_letter(opt.index) + " " + opt.surface;
            }
            return out;
        }
        case QuestionFormat::FillInBlank: {
            if (!rec.fib_statement) {
                throw ValidationError("record " + rec.id +
                                      ": fill-in-blank variant without a statement");
            }
            return rec.context + " " + *rec.fib_statement;
        }
        case QuestionFormat::ShortAnswer:
            return rec.context + " " + rec.question;
    }
    throw std::logic_error("unreachable question format");
}

RenderedPrompt build_composite_prompt(const PromptTemplates& templates,
                                      const QuestionVariant& variant) {
    RenderedPrompt prompt;
    prompt.question_id = variant.id();
    prompt.format = variant.format;
    prompt.strategy = StrategyKind::Composite;
    for (const std::string& example : templates.composite_examples) {
        prompt.messages.push_back({MessageRole::System, example});
    }
    prompt.messages.push_back(
        {MessageRole::User, templates.composite_instruction + "\n" + render_question(variant)});
    return prompt;
}

RenderedPrompt build_strategy_prompt(const PromptTemplates& templates,
                                     const QuestionVariant& variant,
                                     StrategyKind strategy) {
    if (strategy == StrategyKind::Composite) {
        return build_composite_prompt(templates, variant);
    }
    RenderedPrompt prompt;
    prompt.question_id = variant.id();
    prompt.format = variant.format;
    prompt.strategy = strategy;
    switch (strategy) {
        case StrategyKind::Baseline:
            break;
        case StrategyKind::SelfDebias:
            prompt.messages.push_back({MessageRole::System, templates.self_debias});
            break;
        case StrategyKind::ChainOfThought:
            prompt.messages.push_back({MessageRole::System, templates.cot});
            break;
        case StrategyKind::Composite:
            break;  // handled above
    }
    prompt.messages.push_back({MessageRole::User, render_question(variant)});
    return prompt;
}

}  // namespace biaseval::prompting
