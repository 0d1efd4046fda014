#include "geofactor/csv.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace geofactor {

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ValidationError("missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

namespace {

std::string where(const std::string& origin, std::size_t row, std::size_t col) {
    return origin + ":" + std::to_string(row) + ":" + std::to_string(col);
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t row = 1, col = 1;  // 1-based for messages

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                    col += 2;
                } else {
                    in_quotes = false;
                    ++col;
                }
            } else {
                field += c;
                if (c == '\n') { ++row; col = 1; } else ++col;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw ParseError(where(origin, row, col) + ": stray quote inside unquoted field");
                in_quotes = true;
                field_was_quoted = true;
                ++col;
                break;
            case ',':
                end_field();
                ++col;
                break;
            case '\r':
                ++col;
                break;  // swallowed; the '\n' ends the record
            case '\n':
                end_record();
                ++row;
                col = 1;
                break;
            default:
                field += c;
                ++col;
        }
    }
    if (in_quotes)
        throw ParseError(where(origin, row, col) + ": unterminated quoted field");
    if (!field.empty() || field_was_quoted || !record.empty())
        end_record();  // final record without trailing newline

    if (records.empty())
        throw ParseError(origin + ": empty file");

    CsvTable out;
    out.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() == 1 && records[r][0].empty())
            continue;  // blank line
        if (records[r].size() != out.header.size())
            throw ParseError(where(origin, r + 1, records[r].size()) + ": expected " +
                             std::to_string(out.header.size()) + " fields, got " +
                             std::to_string(records[r].size()));
        out.rows.push_back(std::move(records[r]));
    }
    return out;
}

CsvTable read_csv(const std::string& path) {
    return parse_csv(read_text_file(path), path);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << csv_escape(header[i]);
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i)
            os << (i ? "," : "") << csv_escape(r[i]);
        os << '\n';
    }
    write_text_file(path, os.str());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error(path + ": cannot open for writing");
    out << content;
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

}  // namespace geofactor
