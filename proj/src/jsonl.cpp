#include "biaseval/jsonl.hpp"

#include <cstdint>
#include <iostream>

namespace biaseval::jsonl {

void for_each(const std::filesystem::path& path,
              const std::function<void(int, const nlohmann::json&)>& fn,
              bool tolerate_torn_tail) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded()) {
            // Only the final line may be torn; anything earlier is corruption.
            if (tolerate_torn_tail && in.peek() == EOF) {
                std::cerr << "warning: skipping torn trailing line " << line_no << " in "
                          << path.string() << "\n";
                return;
            }
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": malformed JSON line",
                             line_no);
        }
        fn(line_no, obj);
    }
}

namespace {

// Drops a trailing line with no terminating newline (a write that died
// partway). Without this, appending would fuse the next row onto the torn
// fragment and corrupt a line in the middle of the file.
void trim_torn_tail(const std::filesystem::path& path) {
    std::error_code ec;
    std::uintmax_t size = std::filesystem::file_size(path, ec);
    if (ec || size == 0) return;

    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    in.seekg(static_cast<std::streamoff>(size - 1));
    if (in.get() == '\n') return;

    // Walk back to the last newline; everything after it is the torn line.
    std::uintmax_t keep = 0;
    for (std::uintmax_t pos = size - 1; pos > 0; --pos) {
        in.seekg(static_cast<std::streamoff>(pos - 1));
        if (in.get() == '\n') {
            keep = pos;
            break;
        }
    }
    in.close();
    std::filesystem::resize_file(path, keep, ec);
}

}  // namespace

Writer::Writer(const std::filesystem::path& path, bool truncate) {
    if (!truncate) trim_torn_tail(path);
    out_.open(path, truncate ? std::ios::trunc : std::ios::app);
    if (!out_) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
}

void Writer::write(const nlohmann::json& obj) {
    out_ << obj.dump() << "\n";
    out_.flush();
}

}  // namespace biaseval::jsonl
