#ifndef TOPDOWN_CSV_H_
#define TOPDOWN_CSV_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace topdown {

// Comma-separated fields; no quoting (labels are validated to be
// delimiter-free).
std::vector<std::string> SplitCsv(std::string_view line);
std::string JoinCsv(const std::vector<std::string>& fields);

// Reads a whole file; throws IoError naming the path.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);
bool FileExists(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
};

// Parses a delimited file with a header row. Rows with a field count other
// than the header's raise DataError with the line number.
CsvTable ReadCsv(const std::string& path);
CsvTable ParseCsv(const std::string& text, const std::string& source);

std::int64_t ParseInt64(const std::string& text, const std::string& context);
double ParseDouble(const std::string& text, const std::string& context);

// Shortest decimal that round-trips the double.
std::string FormatDouble(double value);

std::string Sha256Hex(std::string_view bytes);

}  // namespace topdown

#endif  // TOPDOWN_CSV_H_
