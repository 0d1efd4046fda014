#pragma once

#include <string>
#include <vector>

#include "geofactor/common.hpp"

namespace geofactor {

/// Header + string cells. Typed interpretation happens in the callers.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws ValidationError
    bool has_column(const std::string& name) const;
};

/// RFC-4180-ish: quoted fields, "" escapes, CRLF tolerated.
/// Throws ParseError naming origin, row and column on malformed input,
/// including rows whose cell count disagrees with the header.
CsvTable parse_csv(std::string_view text, const std::string& origin);
CsvTable read_csv(const std::string& path);

/// Fields containing separators/quotes/newlines get quoted on output.
std::string csv_escape(const std::string& field);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string read_text_file(const std::string& path);  // throws ParseError if unreadable
void write_text_file(const std::string& path, const std::string& content);

}  // namespace geofactor
