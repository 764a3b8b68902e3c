#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mdetect::csv {

/// Splits one RFC 4180 record. Quoted fields may contain commas and doubled
/// quotes; embedded newlines are not supported (probe exports never carry them).
std::vector<std::string> parse_line(std::string_view line);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Parses a numeric cell. Empty, non-numeric or non-finite text yields nullopt.
std::optional<double> parse_number(std::string_view cell);

/// Streams a CSV file: the header is handed to on_header, every later
/// non-empty line to on_row together with its 1-based line number.
void for_each_row(const std::string& path,
                  const std::function<void(const std::vector<std::string>&)>& on_header,
                  const std::function<void(const std::vector<std::string>&, std::size_t)>& on_row);

}  // namespace mdetect::csv
