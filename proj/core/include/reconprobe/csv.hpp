#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reconprobe {

// Shortest decimal string that parses back to the same double.
std::string format_shortest(double value);
// "%.17g": at least 9 significant digits, always round-trips. Interchange files.
std::string format_exact(double value);

double parse_double(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws IoError when absent.
  std::size_t column(std::string_view name) const;
};

// RFC 4180 quoting where needed, '\n' line endings.
std::string render_csv(const CsvTable& table);
void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, std::string_view source);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace reconprobe
