#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "biaseval/types.hpp"

/// JSON-lines helpers. Every persisted artifact of the pipeline (corpus,
/// prompts, responses, grades, fixtures) is UTF-8 JSONL, one object per line.
namespace biaseval::jsonl {

/// Calls `fn(line_number, parsed)` for each non-blank line. Line numbers are
/// 1-based. Throws ParseError on malformed JSON unless `tolerate_torn_tail`
/// is set, in which case a malformed final line is skipped (a crash mid-append
/// leaves at most one torn line at the end of a run file).
void for_each(const std::filesystem::path& path,
              const std::function<void(int, const nlohmann::json&)>& fn,
              bool tolerate_torn_tail = false);

/// Append-mode writer that flushes after every line so progress survives
/// an abrupt stop. Opening an existing file for append first trims any torn
/// final line, so a resumed run never welds new rows onto a crashed write.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path, bool truncate = false);

    void write(const nlohmann::json& obj);

private:
    std::ofstream out_;
};

}  // namespace biaseval::jsonl
