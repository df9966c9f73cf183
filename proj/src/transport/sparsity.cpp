#include "transport/sparsity.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace ents {

SparsityPattern SparsityPattern::dense(const BlockLayout& layout) {
  SparsityPattern p;
  p.inputs_.resize(layout.size());
  for (std::size_t r = 0; r < layout.size(); ++r) {
    for (std::size_t c = 0; c <= r; ++c) p.inputs_[r].push_back(c);
  }
  return p;
}

SparsityPattern::SparsityPattern(const BlockLayout& layout, const std::map<std::string, std::vector<std::string>>& deps) {
  inputs_.resize(layout.size());
  for (std::size_t r = 0; r < layout.size(); ++r) inputs_[r].push_back(r);
  for (const auto& [row_label, inputs] : deps) {
    const std::size_t r = layout.index_of(row_label);
    for (const auto& in : inputs) {
      const std::size_t c = layout.index_of(in);
      if (c > r) {
        fail(ErrorCode::InvalidArgument,
             "pattern is not lower-triangular: row '" + row_label + "' cannot depend on later block '" + in + "'");
      }
      inputs_[r].push_back(c);
    }
  }
  for (auto& v : inputs_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

bool SparsityPattern::allows(std::size_t row, std::size_t col) const {
  const auto& v = inputs_.at(row);
  return std::binary_search(v.begin(), v.end(), col);
}

std::map<std::string, std::vector<std::string>> SparsityPattern::to_map(const BlockLayout& layout) const {
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t r = 0; r < inputs_.size(); ++r) {
    auto& v = out[layout[r].label];
    for (std::size_t c : inputs_[r]) {
      if (c != r) v.push_back(layout[c].label);
    }
  }
  return out;
}

}  // namespace ents
