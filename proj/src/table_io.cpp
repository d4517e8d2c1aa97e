#include "mergemeter/table_io.hpp"

#include "mergemeter/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mergemeter {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string & field) {
    if (field.find_first_of(",\"\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string & line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        fail_io("cannot open '" + path.string() + "' for reading");
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            continue;
        }
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

std::vector<std::pair<std::string, std::string>> read_key_values(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        fail_io("cannot open '" + path.string() + "' for reading");
    }
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            fail_validation("'" + path.string() + "' line " + std::to_string(lineno) +
                            ": expected 'key = value'");
        }
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

double parse_double(const std::string & s, const std::string & what) {
    char * end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || end != s.c_str() + s.size()) {
        fail_validation("cannot parse " + what + " from '" + s + "'");
    }
    return v;
}

std::string read_text_file(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        fail_io("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path & path, const std::string & content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        fail_io("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        fail_io("write error on '" + path.string() + "'");
    }
}

} // namespace mergemeter
