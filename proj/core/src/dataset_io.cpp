#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drate/data.hpp"
#include "drate/error.hpp"

namespace drate {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, std::size_t line_no, std::string_view column) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    std::ostringstream msg;
    msg << "non-numeric cell '" << cell << "' in column '" << column << "' at line " << line_no;
    throw DataError(msg.str());
  }
  return value;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

ObservationSet load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset '" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(trim(f));

  const std::size_t d_col = column_index(header, schema.treatment);
  const std::size_t y_col = column_index(header, schema.outcome);
  std::vector<std::size_t> x_cols;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != d_col && c != y_col) x_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.covariates) x_cols.push_back(column_index(header, name));
  }
  if (x_cols.size() < 2) throw DataError("p must be >= 2 (found " + std::to_string(x_cols.size()) + " covariate columns)");

  std::vector<double> xs;
  std::vector<int> ds;
  std::vector<double> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    const auto d_cell = trim(fields[d_col]);
    if (d_cell == "0") {
      ds.push_back(0);
    } else if (d_cell == "1") {
      ds.push_back(1);
    } else {
      throw DataError("non-binary treatment '" + std::string(d_cell) + "' at line " +
                      std::to_string(line_no));
    }
    ys.push_back(parse_number(fields[y_col], line_no, header[y_col]));
    for (auto c : x_cols) xs.push_back(parse_number(fields[c], line_no, header[c]));
  }

  const auto n = static_cast<Index>(ys.size());
  const auto p = static_cast<Index>(x_cols.size());
  Matrix x(n, p);
  IntVector d(n);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    d[i] = ds[static_cast<std::size_t>(i)];
    y[i] = ys[static_cast<std::size_t>(i)];
    for (Index j = 0; j < p; ++j) x(i, j) = xs[static_cast<std::size_t>(i * p + j)];
  }
  return ObservationSet::checked(std::move(x), std::move(d), std::move(y));
}

void save_dataset(const std::filesystem::path& path, const ObservationSet& obs,
                  const DatasetSchema& schema) {
  std::vector<std::string> names = schema.covariates;
  if (names.empty()) {
    for (Index j = 0; j < obs.dimension(); ++j) names.push_back("x" + std::to_string(j + 1));
  }
  if (static_cast<Index>(names.size()) != obs.dimension()) {
    throw DataError("schema names " + std::to_string(names.size()) + " covariates, data has " +
                    std::to_string(obs.dimension()));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  for (const auto& name : names) out << name << ',';
  out << schema.treatment << ',' << schema.outcome << '\n';

  char buf[32];
  auto emit = [&](double v) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.write(buf, len);
  };
  for (Index i = 0; i < obs.size(); ++i) {
    for (Index j = 0; j < obs.dimension(); ++j) {
      emit(obs.covariates()(i, j));
      out << ',';
    }
    out << obs.treatments()[i] << ',';
    emit(obs.outcomes()[i]);
    out << '\n';
  }
  if (!out) throw DataError("failed writing dataset '" + path.string() + "'");
}

}  // namespace drate
