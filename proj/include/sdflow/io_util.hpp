#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace sdflow {

// Output stream that lands at `path` only on commit(); until then it writes
// to a sibling temporary file. An uncommitted file is removed on destruction.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path);
  ~AtomicFile();
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ofstream& stream() { return out_; }
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

std::vector<std::string_view> split_csv_line(std::string_view line);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace sdflow
