#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace formation {

/// Shortest text that is not lossy: 17 significant digits, '.' separator.
std::string format_double(double value);

/// Minimal CSV writer: header row then data rows, '\n' line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace formation
