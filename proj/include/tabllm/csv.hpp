#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tabllm/error.hpp"

namespace tabllm::csv {

// RFC-4180 parser. Handles quoted fields, embedded separators/quotes/newlines
// and both LF and CRLF line endings. Input must be UTF-8.
inline std::vector<std::vector<std::string>> parse(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    size_t i = 0;
    const size_t n = content.size();

    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    while (i < n) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && content[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else {
            switch (c) {
                case '"':
                    if (!field.empty() || field_was_quoted)
                        fail(errc::malformed_csv, "quote inside unquoted field");
                    in_quotes = true;
                    field_was_quoted = true;
                    ++i;
                    break;
                case ',':
                    end_field();
                    ++i;
                    break;
                case '\r':
                    if (i + 1 < n && content[i + 1] == '\n') {
                        end_row();
                        i += 2;
                    } else {
                        field += c;
                        ++i;
                    }
                    break;
                case '\n':
                    end_row();
                    ++i;
                    break;
                default:
                    field += c;
                    ++i;
                    break;
            }
        }
    }
    if (in_quotes) fail(errc::malformed_csv, "unterminated quoted field");
    if (!field.empty() || !row.empty() || field_was_quoted) end_row();
    return rows;
}

inline std::vector<std::vector<std::string>> parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace tabllm::csv
