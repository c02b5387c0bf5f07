#pragma once

// RFC-4180 reading and writing.

#include <string>
#include <string_view>
#include <vector>

namespace smartflow::csv {

using Row = std::vector<std::string>;

/// Parses CRLF- or LF-terminated records; quoted fields may span lines.
/// Throws Error(LoadError) on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string quote(std::string_view field);
/// Records end with "\n".
std::string format_row(const Row& row);

/// Header-keyed view over parsed rows.
struct Table {
    Row header;
    std::vector<Row> rows;

    /// -1 when absent.
    int column(std::string_view name) const;
};

Table parse_table(std::string_view text);

}  // namespace smartflow::csv
