#pragma once

#include <string_view>

#include "core/block_layout.hpp"
#include "core/types.hpp"

namespace ents {

/// N samples of a block-structured vector. Row i is member i.
///
/// Invariants: at least two members, all entries finite, and the layout
/// spans exactly the number of columns. Ensembles are immutable; block
/// accessors return views into the member matrix.
class Ensemble {
 public:
  Ensemble(RowMatrix data, BlockLayout layout);

  /// Single-block ensemble labelled `label`.
  static Ensemble single(RowMatrix data, std::string label = "x");

  /// Concatenates blocks column-wise; all parts must share the member count.
  static Ensemble concat(const std::vector<std::pair<std::string, ConstRowRef>>& parts);

  Index members() const { return data_.rows(); }
  Index dim() const { return data_.cols(); }
  const RowMatrix& data() const { return data_; }
  const BlockLayout& layout() const { return layout_; }

  auto block(std::size_t i) const {
    const Block& b = layout_[i];
    return data_.middleCols(b.offset, b.dim);
  }
  auto block(std::string_view label) const { return block(layout_.index_of(label)); }

 private:
  RowMatrix data_;
  BlockLayout layout_;
};

}  // namespace ents
