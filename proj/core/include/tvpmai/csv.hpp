#ifndef TVPMAI_CSV_HPP
#define TVPMAI_CSV_HPP

#include <string>
#include <vector>

namespace tvpmai::csv {

// Splits one CSV line on commas. Handles double-quoted fields (commas inside
// quotes, doubled quotes as escapes); no multiline fields.
std::vector<std::string> split_line(const std::string& line);

std::string trim(const std::string& s);

// Strict numeric parse of a whole cell; throws ParseError with the given
// location label on failure.
double parse_number(const std::string& cell, const std::string& where);
int parse_int(const std::string& cell, const std::string& where);

// Formats a double with 6 significant digits. All human-facing CSV/table
// output goes through this so reruns are byte-identical.
std::string format_sig(double x);

// Full round-trip precision, for machine-interchange files.
std::string format_full(double x);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace tvpmai::csv

#endif  // TVPMAI_CSV_HPP
