#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/types.hpp"

namespace ents {

struct Block {
  std::string label;
  Index offset = 0;
  Index dim = 0;
};

/// Named, contiguous variable blocks covering [0, total_dim()).
///
/// Blocks are laid out in insertion order; that order is the variable
/// ordering of any triangular map built on the layout.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(const std::vector<std::pair<std::string, Index>>& blocks);

  /// Appends a block after the current last one. Labels must be unique and
  /// dimensions positive.
  BlockLayout& append(std::string label, Index dim);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  Index total_dim() const { return total_; }

  const Block& operator[](std::size_t i) const { return blocks_.at(i); }
  const Block& block(std::string_view label) const { return blocks_[index_of(label)]; }

  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;

  /// Sub-layout made of blocks [first, last) with offsets rebased to zero.
  BlockLayout slice(std::size_t first, std::size_t last) const;

  /// Column label of variable k within a block, e.g. "x_3" for the third
  /// component of block "x".
  std::vector<std::string> column_labels() const;

  friend bool operator==(const BlockLayout& a, const BlockLayout& b);

 private:
  std::vector<Block> blocks_;
  Index total_ = 0;
};

}  // namespace ents
