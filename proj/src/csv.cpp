#include "difflsq/linop.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace difflsq {

namespace {

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& path) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": malformed number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace

Matrix read_dense_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "rows,cols") {
    throw ValidationError(path.string() + ": missing 'rows,cols' header");
  }
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": missing size line");
  const auto dims = split_numbers(line, path);
  if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1) throw ValidationError(path.string() + ": bad size line");
  const auto rows = static_cast<Index>(dims[0]);
  const auto cols = static_cast<Index>(dims[1]);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ShapeError(path.string() + ": row count", rows, i);
    const auto values = split_numbers(line, path);
    if (static_cast<Index>(values.size()) != cols) {
      throw ShapeError(path.string() + ": column count", cols, static_cast<Index>(values.size()));
    }
    for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(j)];
  }
  return m;
}

void write_dense_csv(const std::filesystem::path& path, const Matrix& matrix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "rows,cols\n" << matrix.rows() << ',' << matrix.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < matrix.rows(); ++i) {
    for (Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) out << ',';
      out << matrix(i, j);
    }
    out << '\n';
  }
}

}  // namespace difflsq
