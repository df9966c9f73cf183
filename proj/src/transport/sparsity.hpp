#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/block_layout.hpp"

namespace ents {

/// Which input blocks each row-block of a triangular map may read.
///
/// Row-blocks follow layout order. Every row depends on itself, and only on
/// blocks at or before its own position.
class SparsityPattern {
 public:
  /// Full lower-block-triangular dependence.
  static SparsityPattern dense(const BlockLayout& layout);

  /// `deps[label]` lists the off-diagonal inputs of row-block `label`; rows
  /// not mentioned depend only on themselves. Self-dependence is implied.
  SparsityPattern(const BlockLayout& layout, const std::map<std::string, std::vector<std::string>>& deps);

  std::size_t rows() const { return inputs_.size(); }

  /// Sorted block indices read by row-block `row`, including `row` itself.
  const std::vector<std::size_t>& inputs(std::size_t row) const { return inputs_.at(row); }

  bool allows(std::size_t row, std::size_t col) const;

  /// Inverse of the constructor: off-diagonal inputs per row label.
  std::map<std::string, std::vector<std::string>> to_map(const BlockLayout& layout) const;

 private:
  SparsityPattern() = default;
  std::vector<std::vector<std::size_t>> inputs_;
};

}  // namespace ents
