/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Small text helpers shared by the dataset and benchmark writers.

#pragma once

#include <sgf/error.hpp>

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sgf::detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline bool looks_numeric(std::string_view s) {
    s = trim(s);
    return !s.empty() && (std::isdigit(static_cast<unsigned char>(s.front())) ||
                          s.front() == '-' || s.front() == '+' || s.front() == '.');
}

// Calls fn(line_number, cells) for every non-empty line. A first line whose
// first cell is not numeric is treated as a header and skipped.
template <typename Fn>
void for_each_csv_row(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::vector<std::string_view> cells;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view rest = trim(line);
        if (rest.empty()) {
            continue;
        }
        cells.clear();
        for (;;) {
            const auto comma = rest.find(',');
            cells.push_back(trim(rest.substr(0, comma)));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (lineno == 1 && !looks_numeric(cells.front())) {
            continue;
        }
        fn(lineno, std::span<const std::string_view>(cells));
    }
}

template <typename Int>
Int parse_int(std::string_view s, const std::filesystem::path& path, std::size_t line) {
    Int v{};
    const auto* end = s.data() + s.size();
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": bad integer '" +
                        std::string(s) + "'");
    }
    return v;
}

inline double parse_double(std::string_view s, const std::filesystem::path& path,
                           std::size_t line) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": bad number '" +
                        std::string(s) + "'");
    }
    return v;
}

// Shortest representation that round-trips.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw DataError("write failed for " + path.string());
    }
}

} // namespace sgf::detail
