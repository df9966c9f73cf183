#include "core/block_layout.hpp"

#include "core/error.hpp"

namespace ents {

BlockLayout::BlockLayout(const std::vector<std::pair<std::string, Index>>& blocks) {
  for (const auto& [label, dim] : blocks) append(label, dim);
}

BlockLayout& BlockLayout::append(std::string label, Index dim) {
  if (dim <= 0) fail(ErrorCode::InvalidArgument, "block '" + label + "' must have positive dimension");
  if (label.empty()) fail(ErrorCode::InvalidArgument, "block labels must be non-empty");
  if (find(label)) fail(ErrorCode::InvalidArgument, "duplicate block label '" + label + "'");
  blocks_.push_back(Block{std::move(label), total_, dim});
  total_ += dim;
  return *this;
}

std::optional<std::size_t> BlockLayout::find(std::string_view label) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].label == label) return i;
  }
  return std::nullopt;
}

std::size_t BlockLayout::index_of(std::string_view label) const {
  auto i = find(label);
  if (!i) fail(ErrorCode::InvalidArgument, "unknown block label '" + std::string(label) + "'");
  return *i;
}

BlockLayout BlockLayout::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > blocks_.size()) fail(ErrorCode::InvalidArgument, "layout slice out of range");
  BlockLayout out;
  for (std::size_t i = first; i < last; ++i) out.append(blocks_[i].label, blocks_[i].dim);
  return out;
}

std::vector<std::string> BlockLayout::column_labels() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(total_));
  for (const auto& b : blocks_) {
    for (Index k = 0; k < b.dim; ++k) out.push_back(b.label + "_" + std::to_string(k + 1));
  }
  return out;
}

bool operator==(const BlockLayout& a, const BlockLayout& b) {
  if (a.blocks_.size() != b.blocks_.size()) return false;
  for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
    if (a.blocks_[i].label != b.blocks_[i].label || a.blocks_[i].dim != b.blocks_[i].dim) return false;
  }
  return true;
}

}  // namespace ents
