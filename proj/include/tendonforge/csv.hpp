#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tendonforge {

// All numeric CSV output goes through this: 17 significant digits, enough to
// round-trip an IEEE double, so repeated runs diff clean.
std::string format_g17(double v);

double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rectangular, header-sized
};

CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Convenience for purely numeric tables.
void write_csv_numeric(const std::filesystem::path& path,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows);

}  // namespace tendonforge
