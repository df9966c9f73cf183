#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "core/ensemble.hpp"

namespace ents {

/// Shortest-safe decimal form: 17 significant digits, so parsing the text
/// recovers the identical IEEE-754 double.
std::string format_double(double v);

double parse_double(const std::string& text);

// Ensemble CSV: header `member,<label>_<k>,...`, one row per member,
// members numbered from 1.
void write_ensemble_csv(std::ostream& os, const Ensemble& e);
void write_ensemble_csv(const std::string& path, const Ensemble& e);
Ensemble read_ensemble_csv(std::istream& is);
Ensemble read_ensemble_csv(const std::string& path);

// Splits one CSV line on commas (no quoting; none of our files need it).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace ents
