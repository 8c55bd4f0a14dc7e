#include "smpf/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "smpf/errors.hpp"

namespace smpf {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  auto parent = path.parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::random_device rd;
  const auto tmp = path.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + tmp);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? comma : comma - start);
    // trim surrounding whitespace
    const auto l = cell.find_first_not_of(" \t\r");
    const auto r = cell.find_last_not_of(" \t\r");
    cells.push_back(l == std::string::npos ? "" : cell.substr(l, r - l + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataError("csv row " + std::to_string(row) + " column " + std::to_string(col) +
                    ": cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw DataError("csv row " + std::to_string(row) + " column " + std::to_string(col) +
                    ": non-finite value rejected");
  }
  return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) {
      if (start < content.size()) lines.push_back(content.substr(start));
      break;
    }
    lines.push_back(content.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string::npos) {
    lines.pop_back();
  }
  return lines;
}

int check_feature_header(const std::vector<std::string>& header, bool require_y,
                         const std::filesystem::path& path) {
  int d = static_cast<int>(header.size());
  bool has_y = d > 0 && header.back() == "y";
  if (require_y && !has_y) {
    throw DataError(path.string() + ": last header column must be 'y'");
  }
  if (has_y) d -= 1;
  if (d < 1) throw DataError(path.string() + ": no feature columns");
  for (int i = 0; i < d; ++i) {
    const std::string expected = "x_" + std::to_string(i);
    if (header[i] != expected) {
      throw DataError(path.string() + ": header column " + std::to_string(i) +
                      " must be '" + expected + "', got '" + header[i] + "'");
    }
  }
  return has_y ? -d : d;  // sign encodes the presence of a y column
}

DatasetCsv load_csv(const std::filesystem::path& path, bool require_y) {
  DatasetCsv data;
  const auto lines = read_lines(path);
  if (lines.empty()) return data;

  const auto header = split_line(lines[0]);
  const int signed_d = check_feature_header(header, require_y, path);
  const bool has_y = signed_d < 0;
  data.d = has_y ? -signed_d : signed_d;
  const std::size_t expected_cells = static_cast<std::size_t>(data.d) + (has_y ? 1 : 0);

  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto cells = split_line(lines[row]);
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != expected_cells) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(expected_cells));
    }
    for (int i = 0; i < data.d; ++i) data.x.push_back(parse_cell(cells[i], row, i));
    data.y.push_back(has_y ? parse_cell(cells[data.d], row, data.d) : 0.0);
  }
  return data;
}

}  // namespace

DatasetCsv load_dataset_csv(const std::filesystem::path& path) {
  DatasetCsv data = load_csv(path, /*require_y=*/true);
  if (data.rows() == 0) throw DataError(path.string() + ": dataset has no rows");
  return data;
}

DatasetCsv load_points_csv(const std::filesystem::path& path) {
  return load_csv(path, /*require_y=*/false);
}

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

}  // namespace smpf
