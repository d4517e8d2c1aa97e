#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mergemeter {

// Shortest round-trip decimal form of a double; deterministic across runs.
std::string format_double(double v);

// Minimal CSV: fields quoted only when they contain a comma, quote or
// newline. Parsing accepts both quoted and bare fields.
std::string csv_escape(const std::string & field);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path & path);
std::vector<std::string> split_csv_line(const std::string & line);

// "key = value" config files with '#' comments.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path & path);

double parse_double(const std::string & s, const std::string & what);
std::string read_text_file(const std::filesystem::path & path);
void write_text_file(const std::filesystem::path & path, const std::string & content);

} // namespace mergemeter
