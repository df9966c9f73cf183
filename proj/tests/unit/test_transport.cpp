#include <cmath>
#include <sstream>

#include "core/error.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "transport/affine_map.hpp"

using namespace ents;
using namespace ents::testing;

namespace {

Ensemble two_block(const RowMatrix& w, Index dy = 1) {
  return Ensemble(w, BlockLayout({{"y", dy}, {"x", w.cols() - dy}}));
}

}  // namespace

TEST_CASE("sparsity pattern structure") {
  const BlockLayout l({{"y", 1}, {"a", 1}, {"b", 2}});
  const SparsityPattern p(l, {{"b", {"a"}}});
  CHECK(p.inputs(0) == std::vector<std::size_t>{0});
  CHECK(p.inputs(2) == std::vector<std::size_t>{1, 2});
  CHECK(p.allows(2, 1));
  CHECK_FALSE(p.allows(2, 0));
  CHECK_FALSE(p.allows(1, 2));
  CHECK_THROWS_AS(SparsityPattern(l, {{"a", {"b"}}}), Error);
  CHECK_THROWS_AS(SparsityPattern(l, {{"a", {"zz"}}}), Error);
  const auto dense = SparsityPattern::dense(l);
  CHECK(dense.inputs(2) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("fit of an identity-covariance ensemble is the identity") {
  const Ensemble e = Ensemble::single(exact_moments(50, Vector::Zero(3), Matrix::Identity(3, 3), 1));
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  CHECK((m.coefficients() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.shift().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit inverts the hand Cholesky factor") {
  const Ensemble e(exact_moments(40, Vector::Zero(2), mat(2, 2, {4, 2, 2, 5}), 2), BlockLayout({{"a", 1}, {"b", 1}}));
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  CHECK((m.coefficients() - mat(2, 2, {0.5, 0, -0.25, 0.5})).cwiseAbs().maxCoeff() < 1e-12);
  // A single block holding both variables yields the same matrix.
  const Ensemble one = Ensemble::single(e.data());
  CHECK((fit_affine_map(one, SparsityPattern::dense(one.layout())).coefficients() - m.coefficients()).norm() < 1e-12);
}

TEST_CASE("sparse fit with truly absent cross-covariance matches the dense fit") {
  Matrix cov = Matrix::Zero(3, 3);
  cov.topLeftCorner(1, 1) << 2.0;
  cov.bottomRightCorner(2, 2) << 3, 1, 1, 2;
  const Ensemble e(exact_moments(30, vec({1, -1, 0.5}), cov, 3), BlockLayout({{"a", 1}, {"b", 2}}));
  const auto dense = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  const auto sparse = fit_affine_map(e, SparsityPattern(e.layout(), {}));
  CHECK((dense.coefficients() - sparse.coefficients()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit respects sparsity exactly") {
  const BlockLayout l({{"y", 1}, {"a", 2}, {"b", 1}, {"c", 2}});
  const SparsityPattern p(l, {{"a", {"y"}}, {"c", {"a"}}});
  const Ensemble e(RandomStream(4, 0, 0, Purpose::Prior).standard_normal(40, 6) * mat(6, 6, {1, 0.3, 0, 0, 0.2, 0,  //
                                                                                            0, 1, 0.4, 0, 0, 0,    //
                                                                                            0, 0, 1, 0.5, 0, 0.1,  //
                                                                                            0, 0, 0, 1, 0.3, 0,    //
                                                                                            0, 0, 0, 0, 1, 0.6,    //
                                                                                            0, 0, 0, 0, 0, 1}),
                   l);
  const auto m = fit_affine_map(e, p);
  const Matrix& c = m.coefficients();
  for (std::size_t r = 0; r < l.size(); ++r) {
    for (std::size_t k = 0; k < l.size(); ++k) {
      const auto blk = c.block(l[r].offset, l[k].offset, l[r].dim, l[k].dim);
      if (!p.allows(r, k)) CHECK(blk.isZero(0.0));
      if (r == k) CHECK(blk.isLowerTriangular(0.0));
    }
  }
  CHECK((c.diagonal().array() > 0.0).all());
  // Row-blocks are regressions, so each row of forward() is uncorrelated
  // with its own active inputs.
  const Ensemble z = forward(m, e);
  CHECK(empirical_cross_cov(z.block("c"), e.block("a")).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(empirical_cov(z.block("c")).isIdentity(1e-10));
}

TEST_CASE("fit reports too few members and collapse by row-block") {
  const Ensemble small = Ensemble::single(RandomStream(1, 0, 0, Purpose::Prior).standard_normal(4, 3), "x");
  try {
    fit_affine_map(small, SparsityPattern::dense(small.layout()));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientMembers);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
  RowMatrix flat = RandomStream(2, 0, 0, Purpose::Prior).standard_normal(10, 2);
  flat.col(1).setConstant(3.0);
  const Ensemble e(flat, BlockLayout({{"y", 1}, {"x", 1}}));
  try {
    fit_affine_map(e, SparsityPattern::dense(e.layout()));
    FAIL("expected failure");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::EnsembleCollapse);
    CHECK(std::string(err.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("map constructor rejects invalid coefficients") {
  const BlockLayout l({{"y", 1}, {"x", 1}});
  const auto sparse = SparsityPattern(l, {});
  CHECK_THROWS_AS(AffineTriangularMap(mat(2, 2, {1, 0, 1, 1}), Vector::Zero(2), l, sparse), Error);
  CHECK_THROWS_AS(AffineTriangularMap(mat(2, 2, {1, 0, 0, -1}), Vector::Zero(2), l, sparse), Error);
  const BlockLayout one({{"x", 2}});
  CHECK_THROWS_AS(AffineTriangularMap(mat(2, 2, {1, 0.5, 0, 1}), Vector::Zero(2), one, SparsityPattern::dense(one)), Error);
}

TEST_CASE("objective of the identity map on standardized data") {
  const RowMatrix w = exact_moments(25, Vector::Zero(2), Matrix::Identity(2, 2), 5);
  const Ensemble e = Ensemble::single(w);
  const AffineTriangularMap id(Matrix::Identity(2, 2), Vector::Zero(2), e.layout(), SparsityPattern::dense(e.layout()));
  const double expected = 0.5 * 25.0 * (w.col(0).squaredNorm() / 25.0 + w.col(1).squaredNorm() / 25.0);
  CHECK(kl_objective(id, e) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fitted map is a local minimizer of the objective") {
  // The closed form uses the 1/(N-1) covariance while the unnormalized
  // objective is minimized by the 1/N covariance; the two differ by the
  // scalar factor sqrt((N-1)/N). With N large that offset (~1/(2N)) is far
  // below the 1e-3 perturbation size.
  const Index n = 20000;
  const BlockLayout l({{"y", 1}, {"a", 2}, {"b", 1}});
  const SparsityPattern p(l, {{"b", {"a"}}});
  const RowMatrix w = normal_draws(n, vec({0.5, 1, -1, 2}), mat(4, 4, {2, 0.5, 0.3, 0.1,  //
                                                                     0.5, 1, 0.2, 0.4,  //
                                                                     0.3, 0.2, 1.5, 0.3,  //
                                                                     0.1, 0.4, 0.3, 1}),
                                  6);
  const Ensemble e(w, l);
  const auto m = fit_affine_map(e, p);
  const double best = kl_objective(m, e);

  SparsityPattern pattern = p;
  int worse = 0;
  const int trials = 120;
  for (int t = 0; t < trials; ++t) {
    const RowMatrix u = RandomStream(100 + static_cast<std::uint64_t>(t), 0, 0, Purpose::Perturbation).standard_normal(4, 4);
    Matrix c = m.coefficients();
    for (std::size_t r = 0; r < l.size(); ++r) {
      for (std::size_t k = 0; k <= r; ++k) {
        if (!pattern.allows(r, k)) continue;
        for (Index i = 0; i < l[r].dim; ++i) {
          for (Index j = 0; j < l[k].dim; ++j) {
            if (r == k && j > i) continue;
            c(l[r].offset + i, l[k].offset + j) += 1e-3 * u(l[r].offset + i, l[k].offset + j);
          }
        }
      }
    }
    const AffineTriangularMap perturbed(c, m.shift(), l, p);
    if (kl_objective(perturbed, e) > best) ++worse;
  }
  CHECK(worse == trials);
}

TEST_CASE("fitted map and objective minimizer differ by the sample-size factor") {
  const Index n = 60;
  const RowMatrix w = normal_draws(n, vec({0, 0}), mat(2, 2, {2, 0.7, 0.7, 1}), 7);
  const Ensemble e = Ensemble::single(w);
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  // Minimizer of the unnormalized objective: inverse Cholesky factor of the 1/N covariance.
  const Matrix biased = empirical_cov(w) * (static_cast<double>(n - 1) / static_cast<double>(n));
  const Matrix c_opt = lower_inverse(cholesky_lower(biased).lower);
  CHECK((c_opt - std::sqrt(static_cast<double>(n) / static_cast<double>(n - 1)) * m.coefficients()).norm() < 1e-12);
  const AffineTriangularMap opt(c_opt, m.shift(), e.layout(), SparsityPattern::dense(e.layout()));
  CHECK(kl_objective(opt, e) <= kl_objective(m, e));
}

TEST_CASE("doubling a diagonal coefficient increases the objective") {
  const Ensemble e(normal_draws(500, vec({0, 0, 0}), mat(3, 3, {1, 0.2, 0.1, 0.2, 1, 0.3, 0.1, 0.3, 1}), 8),
                   BlockLayout({{"y", 1}, {"x", 2}}));
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  for (Index k = 0; k < 3; ++k) {
    Matrix c = m.coefficients();
    c(k, k) *= 2.0;
    CHECK(kl_objective(AffineTriangularMap(c, m.shift(), m.layout(), m.pattern()), e) > kl_objective(m, e));
  }
  Matrix neg = m.coefficients();
  neg(0, 0) = 0.0;
  CHECK_THROWS_AS(AffineTriangularMap(neg, m.shift(), m.layout(), m.pattern()), Error);
}

TEST_CASE("forward evaluation") {
  const Ensemble e = two_block(normal_draws(30, vec({1, 2, 3}), mat(3, 3, {2, 1, 0, 1, 2, 0.5, 0, 0.5, 1}), 9));
  const AffineTriangularMap id(Matrix::Identity(3, 3), Vector::Zero(3), e.layout(), SparsityPattern::dense(e.layout()));
  CHECK(forward(id, e).data() == e.data());

  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  const Ensemble z = forward(m, e);
  CHECK(empirical_mean(z.data()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((empirical_cov(z.data()) - Matrix::Identity(3, 3)).norm() <= 1e-8);

  RowMatrix w(2, 1);
  w << 3, 0;
  const Ensemble s = Ensemble::single(w);
  const AffineTriangularMap scalar(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0), s.layout(),
                                   SparsityPattern::dense(s.layout()));
  CHECK(forward(scalar, s).data()(0, 0) == 4.0);
}

TEST_CASE("conditional inversion") {
  const BlockLayout l({{"y", 1}, {"x", 1}});
  const AffineTriangularMap m(mat(2, 2, {1, 0, 1, 1}), Vector::Zero(2), l, SparsityPattern::dense(l));
  const ConditioningSpec spec({"y"}, vec({2.0}));
  CHECK(invert_conditional(m, spec, RowMatrix::Constant(1, 1, 5.0))(0, 0) == doctest::Approx(3.0));

  // Two chained lower rows against an explicit solve.
  const BlockLayout l3({{"y", 1}, {"x", 2}});
  const Matrix c = mat(3, 3, {1.5, 0, 0, 0.4, 2.0, 0, -0.7, 0.3, 0.8});
  const Vector mu = vec({0.1, -0.2, 0.3});
  const AffineTriangularMap chain(c, mu, l3, SparsityPattern::dense(l3));
  RowMatrix z(1, 2);
  z << 0.9, -1.1;
  const double ystar = 1.7;
  const RowMatrix x = invert_conditional(chain, ConditioningSpec({"y"}, vec({ystar})), z);
  const Vector rhs = z.row(0).transpose() - c.bottomLeftCorner(2, 1) * (ystar - mu(0));
  const Vector expect = c.bottomRightCorner(2, 2).fullPivLu().solve(rhs) + mu.tail(2);
  CHECK((x.row(0).transpose() - expect).norm() < 1e-14);

  // Round trip: forward then invert with each member's own prefix.
  const Ensemble e = two_block(normal_draws(20, vec({0, 1, -1}), mat(3, 3, {1, 0.5, 0.2, 0.5, 2, 0.3, 0.2, 0.3, 1}), 10));
  const auto fm = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  const Ensemble fz = forward(fm, e);
  const RowMatrix back = invert_conditional(fm, ConditioningSpec({"y"}, RowMatrix(e.block("y"))), fz.data().rightCols(2));
  CHECK((back - RowMatrix(e.block("x"))).cwiseAbs().maxCoeff() <= 1e-10);

  CHECK_THROWS_AS(invert_conditional(m, ConditioningSpec({"x"}, vec({1.0})), RowMatrix::Zero(1, 1)), Error);
}

TEST_CASE("composite conditioning") {
  const Matrix cov = mat(3, 3, {2, 0.8, 0.4, 0.8, 1.5, 0.3, 0.4, 0.3, 1});
  const RowMatrix w = normal_draws(40, vec({0.2, 1, -1}), cov, 11);
  const Ensemble e = two_block(w);
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  const ConditioningSpec spec({"y"}, vec({1.3}));
  const Ensemble post = composite_condition(m, e, spec);
  CHECK(post.layout() == BlockLayout({{"x", 2}}));
  const RowMatrix direct = gaussian_condition_direct(e.block("x"), e.block("y"), spec);
  CHECK(max_rel_dev(post.data(), direct) < 1e-8);

  // Constant observation equal to y*: nothing to learn. (Constant y would
  // collapse the map fit, so fit on the original and condition the copy.)
  RowMatrix wc = w;
  wc.col(0).setConstant(1.3);
  const Ensemble constant = two_block(wc);
  const RowMatrix zero_signal = composite_condition(m, constant, spec).data();
  CHECK((zero_signal - RowMatrix(constant.block("x"))).cwiseAbs().maxCoeff() < 1e-12);

  Matrix c = m.coefficients();
  c.block(1, 0, 2, 1).setZero();
  const AffineTriangularMap decoupled(c, m.shift(), m.layout(), m.pattern());
  CHECK((composite_condition(decoupled, e, spec).data() - RowMatrix(e.block("x"))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("composite conditioning equals the Kalman form for many ensembles") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Index dy = 1 + static_cast<Index>(seed % 3);
    const Index d = dy + 1 + static_cast<Index>(seed % 4);
    const RowMatrix a = RandomStream(seed, 3, 0, Purpose::Prior).standard_normal(d, d);
    const RowMatrix w = RandomStream(seed, 4, 0, Purpose::Prior).standard_normal(3 * d + 5, d) * a;
    const Ensemble e = two_block(w, dy);
    const RowMatrix ystar = RandomStream(seed, 5, 0, Purpose::Prior).standard_normal(1, dy);
    const ConditioningSpec spec({"y"}, Vector(ystar.row(0).transpose()));
    const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
    CHECK(max_rel_dev(composite_condition(m, e, spec).data(), gaussian_condition_direct(e.block("x"), e.block("y"), spec)) <
          1e-8);
  }
}

TEST_CASE("conditioning results do not depend on the order of the state blocks") {
  const Matrix cov = mat(4, 4, {2, 0.6, 0.5, 0.3, 0.6, 1.5, 0.4, 0.2, 0.5, 0.4, 1.2, 0.1, 0.3, 0.2, 0.1, 1});
  const RowMatrix w = normal_draws(200, vec({0, 1, 2, 3}), cov, 12);
  const Ensemble ab(w, BlockLayout({{"y", 1}, {"a", 1}, {"b", 2}}));
  RowMatrix swapped(w.rows(), 4);
  swapped << w.col(0), w.rightCols(2), w.col(1);
  const Ensemble ba(swapped, BlockLayout({{"y", 1}, {"b", 2}, {"a", 1}}));
  const ConditioningSpec spec({"y"}, vec({0.7}));
  const Ensemble pa = composite_condition(fit_affine_map(ab, SparsityPattern::dense(ab.layout())), ab, spec);
  const Ensemble pb = composite_condition(fit_affine_map(ba, SparsityPattern::dense(ba.layout())), ba, spec);
  CHECK((RowMatrix(pa.block("a")) - RowMatrix(pb.block("a"))).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((RowMatrix(pa.block("b")) - RowMatrix(pb.block("b"))).cwiseAbs().maxCoeff() <= 1e-6);
  const Matrix ca = fit_affine_map(ab, SparsityPattern::dense(ab.layout())).coefficients();
  const Matrix cb = fit_affine_map(ba, SparsityPattern::dense(ba.layout())).coefficients();
  CHECK(std::abs(ca(1, 1) - cb(3, 3)) > 1e-6);
}

TEST_CASE("Gaussian conditioning with exact covariances") {
  RowMatrix y(1, 1), x(1, 1);
  y << 0.0;
  x << 1.0;
  const ConditioningSpec spec({"y"}, vec({2.0}));
  CHECK(gaussian_condition_with(x, y, spec, Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0))(0, 0) ==
        doctest::Approx(2.0));
  CHECK(gaussian_condition_with(x, y, spec, Matrix::Zero(1, 1), Matrix::Constant(1, 1, 2.0))(0, 0) == 1.0);

  const RowMatrix w = normal_draws(30, vec({2, 0}), mat(2, 2, {1, 0.5, 0.5, 1}), 13);
  RowMatrix yy = w.col(0);
  const RowMatrix xx = w.col(1);
  yy.col(0) = RandomStream(1, 0, 0, Purpose::Prior).standard_normal(30, 1).col(0);
  const ConditioningSpec at_members({"y"}, yy);
  CHECK(gaussian_condition_direct(xx, yy, at_members) == xx);
}

TEST_CASE("map serialization") {
  const Ensemble e = two_block(normal_draws(20, vec({0, 1}), mat(2, 2, {1, 0.3, 0.3, 1}), 14));
  const auto m = fit_affine_map(e, SparsityPattern::dense(e.layout()));
  std::stringstream js;
  write_map_json(js, m);
  const auto j = nlohmann::json::parse(js.str());
  CHECK(j["layout"].size() == 2);
  CHECK(j["coefficients"][0][1].get<double>() == 0.0);
  CHECK(j["coefficients"][1][0].get<double>() == m.coefficients()(1, 0));
  CHECK(j["pattern"]["x"][0] == "y");
  std::stringstream cs;
  write_map_csv(cs, m);
  std::string header;
  std::getline(cs, header);
  CHECK(header == "row,shift,y_1,x_1");
}
