#include "mdetect/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "mdetect/error.hpp"
#include "mdetect/util.hpp"

namespace mdetect::csv {

std::vector<std::string> parse_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::optional<double> parse_number(std::string_view cell) {
    cell = trim(cell);
    if (cell.empty()) return std::nullopt;
    if (cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

void for_each_row(const std::string& path,
                  const std::function<void(const std::vector<std::string>&)>& on_header,
                  const std::function<void(const std::vector<std::string>&, std::size_t)>& on_row) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = parse_line(line);
        if (!have_header) {
            on_header(fields);
            have_header = true;
        } else {
            on_row(fields, line_no);
        }
    }
    if (in.bad()) fail(ErrorCode::IoError, "read failed for " + path);
    if (!have_header) fail(ErrorCode::SchemaMismatch, path + ": missing header row");
}

}  // namespace mdetect::csv
