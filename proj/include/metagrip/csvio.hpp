#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "metagrip/errors.hpp"

namespace metagrip {

/// Shortest decimal representation that round-trips to the same double.
/// Keeps CSV output byte-stable across runs and platforms.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Comma-separated writer: UTF-8, LF line endings, mandatory header row.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), columns_(header.size()) {
        if (!out_) throw ConfigError("cannot open output file " + path.string());
        write_row_strings(header);
    }

    void write_row_strings(const std::vector<std::string>& cells) {
        if (cells.size() != columns_)
            throw ConfigError("csv row has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(columns_));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void write_row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        write_row_strings(cells);
    }

private:
    std::ofstream out_;
    std::size_t columns_;
};

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace metagrip
