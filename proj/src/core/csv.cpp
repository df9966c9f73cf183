#include "core/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include "core/error.hpp"

namespace ents {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc{}) fail(ErrorCode::Io, "failed to format double");
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) fail(ErrorCode::Io, "cannot parse '" + text + "' as a number");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

void write_ensemble_csv(std::ostream& os, const Ensemble& e) {
  os << "member";
  for (const auto& label : e.layout().column_labels()) os << ',' << label;
  os << '\n';
  for (Index i = 0; i < e.members(); ++i) {
    os << (i + 1);
    for (Index k = 0; k < e.dim(); ++k) os << ',' << format_double(e.data()(i, k));
    os << '\n';
  }
}

void write_ensemble_csv(const std::string& path, const Ensemble& e) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_ensemble_csv(os, e);
  if (!os) fail(ErrorCode::Io, "failed writing '" + path + "'");
}

Ensemble read_ensemble_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCode::Io, "ensemble CSV is empty");
  const auto header = split_csv_line(line);
  if (header.empty() || header.front() != "member") fail(ErrorCode::Io, "ensemble CSV header must start with 'member'");

  BlockLayout layout;
  std::string current;
  Index current_dim = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto pos = header[c].rfind('_');
    if (pos == std::string::npos || pos == 0) fail(ErrorCode::Io, "malformed column label '" + header[c] + "'");
    std::string label = header[c].substr(0, pos);
    if (label != current) {
      if (current_dim > 0) layout.append(current, current_dim);
      current = std::move(label);
      current_dim = 0;
    }
    ++current_dim;
  }
  if (current_dim > 0) layout.append(current, current_dim);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorCode::Io, "ensemble CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                              " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c]));
    rows.push_back(std::move(row));
  }
  RowMatrix data(static_cast<Index>(rows.size()), layout.total_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) data(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  return Ensemble(std::move(data), std::move(layout));
}

Ensemble read_ensemble_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return read_ensemble_csv(is);
}

}  // namespace ents
