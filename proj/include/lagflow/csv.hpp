#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lagflow {

/// 17 significant digits (%.17g): every double round-trips bitwise through
/// the emitted text, so rebuilt trajectories audit identically.
std::string format_double(double v);

/// Strict double parse of a full token (std::from_chars); throws on garbage.
double parse_double(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws if absent
};

/// Comma-separated, first line a header, no quoting. Blank lines skipped.
CsvTable read_csv(const std::filesystem::path& file);

void write_text_file(const std::filesystem::path& file, const std::string& content);

}  // namespace lagflow
