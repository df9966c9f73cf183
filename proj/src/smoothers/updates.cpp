#include "smoothers/updates.hpp"

#include <string>

#include "core/ensemble.hpp"
#include "core/error.hpp"
#include "core/linalg.hpp"
#include "core/stats.hpp"
#include "transport/affine_map.hpp"

namespace ents {

namespace {

std::string state_label(std::size_t i) { return "x" + std::to_string(i); }

std::vector<RowMatrix> split_columns(const RowMatrix& data, const std::vector<RowMatrix>& like) {
  std::vector<RowMatrix> out;
  Index offset = 0;
  for (const auto& s : like) {
    out.emplace_back(data.middleCols(offset, s.cols()));
    offset += s.cols();
  }
  return out;
}

}  // namespace

std::vector<RowMatrix> dense_update(ConstRowRef y, const Vector& y_star, const std::vector<RowMatrix>& states, Engine engine,
                                    bool decoupled) {
  if (states.empty()) return {};
  const ConditioningSpec spec({"y"}, y_star);
  if (engine == Engine::Kalman) {
    std::vector<RowMatrix> out;
    out.reserve(states.size());
    for (const auto& x : states) out.push_back(gaussian_condition_direct(x, y, spec));
    return out;
  }

  std::vector<std::pair<std::string, ConstRowRef>> parts{{"y", y}};
  for (std::size_t i = 0; i < states.size(); ++i) parts.emplace_back(state_label(i), states[i]);
  const Ensemble joint = Ensemble::concat(parts);
  SparsityPattern pattern = SparsityPattern::dense(joint.layout());
  if (decoupled) {
    std::map<std::string, std::vector<std::string>> deps;
    for (std::size_t i = 0; i < states.size(); ++i) deps[state_label(i)] = {"y"};
    pattern = SparsityPattern(joint.layout(), deps);
  }
  const Ensemble post = composite_condition(fit_affine_map(joint, pattern), joint, spec);
  return split_columns(post.data(), states);
}

RowMatrix backward_update(ConstRowRef x_r, ConstRowRef x_next, ConstRowRef x_next_star, Engine engine) {
  const ConditioningSpec spec({"next"}, RowMatrix(x_next_star));
  if (engine == Engine::Kalman) return gaussian_condition_direct(x_r, x_next, spec);
  const Ensemble joint = Ensemble::concat({{"next", x_next}, {"cur", x_r}});
  return composite_condition(fit_affine_map(joint, SparsityPattern::dense(joint.layout())), joint, spec).data();
}

ForwardGains forward_gains(ConstRowRef y, ConstRowRef x_prev, ConstRowRef x) {
  const Index o = y.cols();
  const Index p = x_prev.cols();
  RowMatrix a(y.rows(), o + p);
  a << y, x_prev;
  const Matrix s_aa = empirical_cov(a);
  const Matrix s_ax = empirical_cross_cov(a, x);
  const Matrix sol = spd_solve(s_aa, -s_ax, "forward-gain system");  // [K^T; B^T]
  return {sol.topRows(o).transpose(), sol.bottomRows(p).transpose()};
}

RowMatrix forward_update(ConstRowRef y, const Vector& y_star, ConstRowRef x_prev, ConstRowRef x_prev_star, ConstRowRef x,
                         Engine engine) {
  if (engine == Engine::Kalman) {
    const ForwardGains g = forward_gains(y, x_prev, x);
    const RowMatrix d_y = (-(y.rowwise() - y_star.transpose())).eval();  // y* - Y
    const RowMatrix d_p = x_prev_star - x_prev;                         // X*_{r-1} - X_{r-1}
    return x - d_y * g.k.transpose() - d_p * g.b.transpose();
  }
  const Ensemble joint = Ensemble::concat({{"y", y}, {"prev", x_prev}, {"cur", x}});
  RowMatrix pinned(y.rows(), y.cols() + x_prev.cols());
  pinned << y_star.transpose().replicate(y.rows(), 1), x_prev_star;
  const ConditioningSpec spec({"y", "prev"}, pinned);
  return composite_condition(fit_affine_map(joint, SparsityPattern::dense(joint.layout())), joint, spec).data();
}

Matrix fixed_point_gain(ConstRowRef y, ConstRowRef x_t, ConstRowRef x_j) {
  const Matrix relay = spd_right_solve(empirical_cross_cov(x_j, x_t), empirical_cov(x_t), "Sigma_tt");
  const Matrix kalman = spd_right_solve(empirical_cross_cov(x_t, y), empirical_cov(y), "Sigma_yy");
  return relay * kalman;
}

std::pair<RowMatrix, std::vector<RowMatrix>> fixed_point_update(ConstRowRef y, const Vector& y_star, ConstRowRef x_t,
                                                                const std::vector<RowMatrix>& fixed, Engine engine) {
  const ConditioningSpec spec({"y"}, y_star);
  if (engine == Engine::Kalman) {
    RowMatrix xt_star = gaussian_condition_direct(x_t, y, spec);
    std::vector<RowMatrix> out;
    const RowMatrix innovation = y.rowwise() - y_star.transpose();
    for (const auto& xj : fixed) out.push_back(xj - innovation * fixed_point_gain(y, x_t, xj).transpose());
    return {std::move(xt_star), std::move(out)};
  }
  std::vector<std::pair<std::string, ConstRowRef>> parts{{"y", y}, {"xt", x_t}};
  std::map<std::string, std::vector<std::string>> deps{{"xt", {"y"}}};
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    parts.emplace_back(state_label(i), fixed[i]);
    deps[state_label(i)] = {"xt"};
  }
  const Ensemble joint = Ensemble::concat(parts);
  const SparsityPattern pattern(joint.layout(), deps);
  const Ensemble post = composite_condition(fit_affine_map(joint, pattern), joint, spec);
  RowMatrix xt_star = post.block("xt");
  std::vector<RowMatrix> out;
  for (std::size_t i = 0; i < fixed.size(); ++i) out.emplace_back(post.block(state_label(i)));
  return {std::move(xt_star), std::move(out)};
}

std::vector<RowMatrix> enks_semi_empirical(const std::vector<RowMatrix>& states, ConstRowRef x_t, ConstRowRef eps,
                                           const Vector& y_star, const Matrix& h, const Matrix& r) {
  if (h.cols() != x_t.cols() || eps.rows() != x_t.rows() || eps.cols() != h.rows() || y_star.size() != h.rows()) {
    fail(ErrorCode::InvalidArgument, "semi-empirical EnKS: inconsistent shapes");
  }
  const Matrix innovation_cov = h * empirical_cov(x_t) * h.transpose() + r;
  const RowMatrix innovation = (x_t * h.transpose() + eps).rowwise() - y_star.transpose();
  const Matrix weights = spd_solve(innovation_cov, innovation.transpose(), "innovation covariance");  // O x N
  std::vector<RowMatrix> out;
  out.reserve(states.size());
  for (const auto& x : states) {
    const Matrix s_xh = empirical_cross_cov(x, x_t) * h.transpose();
    out.push_back(x - (s_xh * weights).transpose());
  }
  return out;
}

RowMatrix enrtss_semi_empirical(ConstRowRef x_r, ConstRowRef eps, ConstRowRef x_next_star, const Matrix& m, const Matrix& q) {
  if (m.cols() != x_r.cols() || eps.rows() != x_r.rows() || eps.cols() != m.rows() || x_next_star.cols() != m.rows()) {
    fail(ErrorCode::InvalidArgument, "semi-empirical EnRTSS: inconsistent shapes");
  }
  const Matrix s = empirical_cov(x_r);
  const Matrix gain = spd_right_solve(s * m.transpose(), m * s * m.transpose() + q, "forecast covariance");
  const RowMatrix signal = x_r * m.transpose() + eps - x_next_star;
  return x_r - signal * gain.transpose();
}

double gain_magnitude(ConstRowRef b, ConstRowRef a) {
  return spd_right_solve(empirical_cross_cov(b, a), empirical_cov(a), "gain denominator").cwiseAbs().mean();
}

double signal_magnitude(ConstRowRef a, ConstRowRef a_star) { return (a - a_star).cwiseAbs().mean(); }

double signal_magnitude_at(ConstRowRef a, const Vector& a_star) { return (a.rowwise() - a_star.transpose()).cwiseAbs().mean(); }

}  // namespace ents
