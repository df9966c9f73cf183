#include "core/ensemble.hpp"

#include <string>

#include "core/error.hpp"

namespace ents {

Ensemble::Ensemble(RowMatrix data, BlockLayout layout) : data_(std::move(data)), layout_(std::move(layout)) {
  if (data_.rows() < 2) {
    fail(ErrorCode::InsufficientMembers, "an ensemble needs at least 2 members, got " + std::to_string(data_.rows()));
  }
  if (layout_.total_dim() != data_.cols()) {
    fail(ErrorCode::InvalidArgument, "layout spans " + std::to_string(layout_.total_dim()) + " variables but data has " +
                                         std::to_string(data_.cols()) + " columns");
  }
  if (!data_.allFinite()) fail(ErrorCode::NonFinite, "ensemble contains non-finite entries");
}

Ensemble Ensemble::single(RowMatrix data, std::string label) {
  BlockLayout layout;
  layout.append(std::move(label), data.cols());
  return Ensemble(std::move(data), std::move(layout));
}

Ensemble Ensemble::concat(const std::vector<std::pair<std::string, ConstRowRef>>& parts) {
  if (parts.empty()) fail(ErrorCode::InvalidArgument, "cannot concatenate zero blocks");
  const Index n = parts.front().second.rows();
  Index d = 0;
  BlockLayout layout;
  for (const auto& [label, m] : parts) {
    if (m.rows() != n) fail(ErrorCode::InvalidArgument, "block '" + label + "' has a different member count");
    layout.append(label, m.cols());
    d += m.cols();
  }
  RowMatrix data(n, d);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    data.middleCols(layout[i].offset, layout[i].dim) = parts[i].second;
  }
  return Ensemble(std::move(data), std::move(layout));
}

}  // namespace ents
