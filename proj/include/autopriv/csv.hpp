#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace autopriv::csv {

// RFC-4180 records: quoted fields may contain commas, escaped quotes ("")
// and embedded line breaks. Rows keep raw field text; interpretation is the
// caller's job.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read_file(const std::filesystem::path& path);
Table parse(const std::string& text, const std::string& origin);

std::string escape_field(const std::string& field);
std::string format_row(const std::vector<std::string>& fields);

// Shortest round-trip representation (std::to_chars); "nan"/"inf" for
// non-finite values.
std::string format_double(double v);

}  // namespace autopriv::csv
