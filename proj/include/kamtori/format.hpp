#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kamtori {

// Shortest text with 17 significant digits, '.' separator; reads back to the
// same double.
std::string format_real(double v);

// Minimal CSV writer: fixed header, numeric or text cells, '\n' line ends.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& add(double v);
  CsvWriter& add_int(long long v);
  CsvWriter& add_text(std::string_view s);
  void end_row();
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return buf_; }

 private:
  std::size_t columns_;
  std::size_t cell_ = 0;
  std::size_t rows_ = 0;
  std::string buf_;
};

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace kamtori
