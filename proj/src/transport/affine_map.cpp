#include "transport/affine_map.hpp"

#include <cmath>
#include <ostream>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/linalg.hpp"
#include "core/stats.hpp"
#include "json.hpp"

namespace ents {

namespace {

std::vector<Index> columns_of(const BlockLayout& layout, const std::vector<std::size_t>& blocks) {
  std::vector<Index> cols;
  for (std::size_t b : blocks) {
    for (Index k = 0; k < layout[b].dim; ++k) cols.push_back(layout[b].offset + k);
  }
  return cols;
}

[[noreturn]] void rethrow_for_block(const Error& err, const std::string& label) {
  fail(err.code(), "row-block '" + label + "': " + err.what());
}

}  // namespace

AffineTriangularMap::AffineTriangularMap(Matrix coefficients, Vector shift, BlockLayout layout, SparsityPattern pattern)
    : coefficients_(std::move(coefficients)),
      shift_(std::move(shift)),
      layout_(std::move(layout)),
      pattern_(std::move(pattern)) {
  const Index d = layout_.total_dim();
  if (coefficients_.rows() != d || coefficients_.cols() != d || shift_.size() != d) {
    fail(ErrorCode::InvalidArgument, "map coefficients/shift do not match the layout dimension");
  }
  if (pattern_.rows() != layout_.size()) fail(ErrorCode::InvalidArgument, "pattern and layout disagree on block count");
  for (std::size_t r = 0; r < layout_.size(); ++r) {
    const Block& rb = layout_[r];
    for (std::size_t c = 0; c < layout_.size(); ++c) {
      const Block& cb = layout_[c];
      auto blk = coefficients_.block(rb.offset, cb.offset, rb.dim, cb.dim);
      if (!pattern_.allows(r, c) && !blk.isZero(0.0)) {
        fail(ErrorCode::InvalidArgument, "coefficient block (" + rb.label + ", " + cb.label + ") violates the sparsity pattern");
      }
      if (r == c) {
        for (Index i = 0; i < rb.dim; ++i) {
          if (!(blk(i, i) > 0.0)) fail(ErrorCode::InvalidArgument, "diagonal of block '" + rb.label + "' must be positive");
          for (Index j = i + 1; j < rb.dim; ++j) {
            if (blk(i, j) != 0.0) fail(ErrorCode::InvalidArgument, "diagonal block '" + rb.label + "' is not lower triangular");
          }
        }
      }
    }
  }
}

ConditioningSpec::ConditioningSpec(std::vector<std::string> labels, const Vector& fixed_values)
    : labels_(std::move(labels)), values_(fixed_values.transpose()) {}

ConditioningSpec::ConditioningSpec(std::vector<std::string> labels, RowMatrix per_member_values)
    : labels_(std::move(labels)), values_(std::move(per_member_values)), per_member_(true) {
  if (values_.rows() < 1) fail(ErrorCode::InvalidArgument, "per-member conditioning values are empty");
}

RowMatrix ConditioningSpec::values_for(Index members) const {
  if (!per_member()) return values_.replicate(members, 1);
  if (values_.rows() != members) {
    fail(ErrorCode::InvalidArgument, "conditioning values have " + std::to_string(values_.rows()) + " rows for " +
                                         std::to_string(members) + " members");
  }
  return values_;
}

std::size_t ConditioningSpec::prefix_blocks(const BlockLayout& layout) const {
  if (labels_.size() > layout.size()) fail(ErrorCode::InvalidArgument, "more conditioned blocks than layout blocks");
  Index dim = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (layout[i].label != labels_[i]) {
      fail(ErrorCode::InvalidArgument, "conditioned blocks must form a layout prefix; '" + labels_[i] + "' is not block " +
                                           std::to_string(i));
    }
    dim += layout[i].dim;
  }
  if (dim != values_.cols()) fail(ErrorCode::InvalidArgument, "conditioning values do not match the prefix dimension");
  return labels_.size();
}

AffineTriangularMap fit_affine_map(const Ensemble& e, const SparsityPattern& pattern) {
  const BlockLayout& layout = e.layout();
  if (pattern.rows() != layout.size()) fail(ErrorCode::InvalidArgument, "pattern and ensemble layout disagree on block count");
  const Index n = e.members();
  const Index d = e.dim();

  const Vector mu = empirical_mean(e.data());
  const Matrix sigma = empirical_cov(e.data());
  Matrix c = Matrix::Zero(d, d);

  for (std::size_t r = 0; r < layout.size(); ++r) {
    const Block& rb = layout[r];
    std::vector<std::size_t> preds;
    for (std::size_t b : pattern.inputs(r)) {
      if (b != r) preds.push_back(b);
    }
    const std::vector<Index> self = columns_of(layout, {r});
    const std::vector<Index> pcols = columns_of(layout, preds);
    const Index width = rb.dim + static_cast<Index>(pcols.size());
    if (n < width + 2) {
      fail(ErrorCode::InsufficientMembers, "row-block '" + rb.label + "' reads " + std::to_string(width) +
                                               " variables and needs at least " + std::to_string(width + 2) +
                                               " members, got " + std::to_string(n));
    }
    const Matrix s_kk = sigma(self, self);
    if (s_kk.trace() <= 0.0) fail(ErrorCode::EnsembleCollapse, "row-block '" + rb.label + "' has zero variance (ensemble collapse)");

    try {
      Matrix residual = s_kk;
      Matrix gain;
      if (!pcols.empty()) {
        const Matrix s_kp = sigma(self, pcols);
        gain = spd_right_solve(s_kp, sigma(pcols, pcols), "predecessor covariance");
        residual -= gain * s_kp.transpose();
        residual = (0.5 * (residual + residual.transpose())).eval();
      }
      const Matrix c_kk = lower_inverse(cholesky_lower(residual, "residual covariance").lower);
      c(self, self) = c_kk;
      if (!pcols.empty()) c(self, pcols) = -c_kk * gain;
    } catch (const Error& err) {
      rethrow_for_block(err, rb.label);
    }
  }
  return AffineTriangularMap(std::move(c), mu, layout, pattern);
}

double kl_objective(const AffineTriangularMap& map, const Ensemble& e) {
  if (!(map.layout() == e.layout())) fail(ErrorCode::InvalidArgument, "map and ensemble layouts differ");
  const Vector diag = map.coefficients().diagonal();
  if ((diag.array() <= 0.0).any()) fail(ErrorCode::InvalidArgument, "map has a non-positive diagonal coefficient");
  const RowMatrix z = forward(map, e).data();
  return 0.5 * z.squaredNorm() - static_cast<double>(e.members()) * diag.array().log().sum();
}

Ensemble forward(const AffineTriangularMap& map, const Ensemble& e) {
  if (!(map.layout() == e.layout())) fail(ErrorCode::InvalidArgument, "map and ensemble layouts differ");
  RowMatrix z = (e.data().rowwise() - map.shift().transpose()) * map.coefficients().transpose();
  return Ensemble(std::move(z), e.layout());
}

RowMatrix invert_conditional(const AffineTriangularMap& map, const ConditioningSpec& spec, ConstRowRef z_tail) {
  const BlockLayout& layout = map.layout();
  const std::size_t p = spec.prefix_blocks(layout);
  const Index d = layout.total_dim();
  const Index o = p < layout.size() ? layout[p].offset : d;
  const Index lower_dim = d - o;
  if (z_tail.cols() != lower_dim) fail(ErrorCode::InvalidArgument, "reference rows do not match the lower-block dimension");

  const Matrix c_ll = map.coefficients().bottomRightCorner(lower_dim, lower_dim);
  for (Index i = 0; i < lower_dim; ++i) {
    if (c_ll(i, i) == 0.0) fail(ErrorCode::InvalidArgument, "zero diagonal coefficient; map cannot be inverted");
  }
  const Matrix c_lp = map.coefficients().bottomLeftCorner(lower_dim, o);
  const RowMatrix pinned = spec.values_for(z_tail.rows()).rowwise() - map.shift().head(o).transpose();

  // Row k of C_ll x = z - C_lp (y* - mu_p) only involves x_1..x_k: forward substitution.
  const Matrix rhs = (z_tail - pinned * c_lp.transpose()).transpose();
  const Matrix x = c_ll.triangularView<Eigen::Lower>().solve(rhs);
  RowMatrix out = x.transpose();
  out.rowwise() += map.shift().tail(lower_dim).transpose();
  return out;
}

Ensemble composite_condition(const AffineTriangularMap& map, const Ensemble& e, const ConditioningSpec& spec) {
  if (!(map.layout() == e.layout())) fail(ErrorCode::InvalidArgument, "map and ensemble layouts differ");
  const BlockLayout& layout = map.layout();
  const std::size_t p = spec.prefix_blocks(layout);
  if (p >= layout.size()) fail(ErrorCode::InvalidArgument, "conditioning covers every block; nothing left to update");
  const Index o = layout[p].offset;
  const Index lower_dim = layout.total_dim() - o;

  const Matrix c_lower = map.coefficients().bottomRows(lower_dim);
  const RowMatrix z = (e.data().rowwise() - map.shift().transpose()) * c_lower.transpose();
  RowMatrix x = invert_conditional(map, spec, z);
  return Ensemble(std::move(x), layout.slice(p, layout.size()));
}

RowMatrix gaussian_condition_direct(ConstRowRef x, ConstRowRef y, const ConditioningSpec& spec) {
  if (y.cols() != spec.dim()) fail(ErrorCode::InvalidArgument, "y* dimension does not match the y block");
  return gaussian_condition_with(x, y, spec, empirical_cross_cov(x, y), empirical_cov(y));
}

RowMatrix gaussian_condition_with(ConstRowRef x, ConstRowRef y, const ConditioningSpec& spec, const Matrix& sigma_xy,
                                  const Matrix& sigma_yy) {
  if (y.cols() != spec.dim()) fail(ErrorCode::InvalidArgument, "y* dimension does not match the y block");
  if (x.rows() != y.rows()) fail(ErrorCode::InvalidArgument, "x and y blocks have different member counts");
  const Matrix gain = spd_right_solve(sigma_xy, sigma_yy, "Sigma_yy");
  return x - (y - spec.values_for(y.rows())) * gain.transpose();
}

void write_map_json(std::ostream& os, const AffineTriangularMap& map) {
  nlohmann::ordered_json j;
  auto& blocks = j["layout"] = nlohmann::ordered_json::array();
  for (const auto& b : map.layout().blocks()) blocks.push_back({{"label", b.label}, {"offset", b.offset}, {"dim", b.dim}});
  j["pattern"] = map.pattern().to_map(map.layout());
  j["shift"] = std::vector<double>(map.shift().data(), map.shift().data() + map.shift().size());
  auto& rows = j["coefficients"] = nlohmann::ordered_json::array();
  for (Index r = 0; r < map.coefficients().rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(map.coefficients().cols()));
    for (Index c = 0; c < map.coefficients().cols(); ++c) row[static_cast<std::size_t>(c)] = map.coefficients()(r, c);
    rows.push_back(row);
  }
  os << j.dump(2) << '\n';
}

void write_map_csv(std::ostream& os, const AffineTriangularMap& map) {
  const auto labels = map.layout().column_labels();
  os << "row,shift";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (Index r = 0; r < map.coefficients().rows(); ++r) {
    os << labels[static_cast<std::size_t>(r)] << ',' << format_double(map.shift()(r));
    for (Index c = 0; c < map.coefficients().cols(); ++c) os << ',' << format_double(map.coefficients()(r, c));
    os << '\n';
  }
}

}  // namespace ents
