#include "autopriv/csv.hpp"

#include "autopriv/tabular.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace autopriv::csv {

namespace {

bool needs_quotes(const std::string& field) {
    return field.find_first_of(",\"\r\n") != std::string::npos;
}

}  // namespace

std::string escape_field(const std::string& field) {
    if (!needs_quotes(field)) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape_field(fields[i]);
    }
    out += '\n';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Table parse(const std::string& text, const std::string& origin) {
    Table table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t record_line = 1;

    auto finish_field = [&] {
        fields.push_back(std::move(field));
        field.clear();
    };
    auto finish_record = [&] {
        finish_field();
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size()) {
                throw Error(origin + ": line " + std::to_string(record_line) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
        }
        fields.clear();
        row_has_content = false;
        record_line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                finish_field();
                row_has_content = true;
                break;
            case '\r':
                break;  // handled with the following '\n'
            case '\n':
                ++line;
                if (row_has_content || !field.empty() || !fields.empty()) finish_record();
                else record_line = line;
                break;
            default:
                field += c;
                row_has_content = true;
                break;
        }
    }
    if (in_quotes) throw Error(origin + ": unterminated quoted field");
    if (row_has_content || !field.empty() || !fields.empty()) finish_record();
    if (table.header.empty()) throw Error(origin + ": empty file (missing header)");
    return table;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.filename().string());
}

}  // namespace autopriv::csv
