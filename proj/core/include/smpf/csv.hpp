#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace smpf {

// Whole-file read; throws IoError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling then renames, so a failed run never leaves
// a partial output file behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// A labeled dataset loaded from CSV: header "x_0,...,x_{d-1},y", row-major
// features, one target per row.
struct DatasetCsv {
  int d = 0;
  std::vector<double> x;  // rows * d, row-major
  std::vector<double> y;

  std::size_t rows() const { return y.size(); }
};

// Strict loader for the dataset format: exact header names, decimal-point
// numbers, every value finite. Throws DataError citing the offending row.
DatasetCsv load_dataset_csv(const std::filesystem::path& path);

// Points-only CSV: header "x_0,...,x_{d-1}" with an optional trailing "y"
// column that is ignored. A file with no data rows yields rows() == 0; an
// entirely empty file yields d == 0.
DatasetCsv load_points_csv(const std::filesystem::path& path);

// Minimal CSV assembly used by report writers: joins each row with commas.
std::string csv_join(const std::vector<std::string>& cells);

}  // namespace smpf
