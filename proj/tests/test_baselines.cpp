#include <doctest.h>

#include <cmath>
#include <set>

#include "autows/baselines.hpp"
#include "autows/error.hpp"
#include "synth.hpp"

using namespace autows;
using namespace autows::testing;

namespace {

// Harmonic solution on the unlabeled nodes: (D_uu - W_uu) F_u = W_ul Y_l.
Matrix harmonic_oracle(const PropagationGraph& g, const std::vector<std::pair<Eigen::Index, int>>& seeds,
                       int classes) {
  const Eigen::Index n = g.size();
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (const auto& [j, v] : g.neighbors[static_cast<std::size_t>(i)]) w(i, j) = v;
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  for (const auto& [i, c] : seeds) label[static_cast<std::size_t>(i)] = c;
  std::vector<Eigen::Index> u;
  for (Eigen::Index i = 0; i < n; ++i)
    if (label[static_cast<std::size_t>(i)] < 0) u.push_back(i);
  const auto nu = static_cast<Eigen::Index>(u.size());
  Matrix a = Matrix::Zero(nu, nu), b = Matrix::Zero(nu, classes);
  for (Eigen::Index r = 0; r < nu; ++r) {
    const Eigen::Index i = u[static_cast<std::size_t>(r)];
    a(r, r) = w.row(i).sum();
    for (Eigen::Index q = 0; q < nu; ++q) a(r, q) -= w(i, u[static_cast<std::size_t>(q)]);
    for (const auto& [j, c] : seeds) b(r, c) += w(i, j);
  }
  const Matrix fu = a.fullPivLu().solve(b);
  Matrix f = Matrix::Zero(n, classes);
  for (const auto& [i, c] : seeds) f(i, c) = 1.0;
  for (Eigen::Index r = 0; r < nu; ++r) f.row(u[static_cast<std::size_t>(r)]) = fu.row(r);
  return f;
}

Matrix line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("few-shot logistic separates well-separated blobs") {
  BundleSpec spec;
  spec.train = blobs(200, 2, 2, 12.0, 0.5, 1);
  spec.val = blobs(40, 2, 2, 12.0, 0.5, 2);
  const DatasetBundle b = make_bundle(spec);
  const WeakLabelOutput out = few_shot_logistic(b);
  CHECK(out.coverage == 1.0);
  CHECK(accuracy_covered(out, spec.train.y) == 1.0);
}

TEST_CASE("few-shot logistic with one labeled class predicts it everywhere") {
  BundleSpec spec;
  spec.train = blobs(50, 2, 2, 4.0, 1.0, 3);
  spec.val = blobs(20, 2, 2, 4.0, 1.0, 4);
  std::fill(spec.val.y.begin(), spec.val.y.end(), 1);
  const WeakLabelOutput out = few_shot_logistic(make_bundle(spec));
  CHECK(out.coverage == 1.0);
  for (int h : out.hard) CHECK(h == 1);
}

TEST_CASE("propagation graph is symmetric without self loops") {
  const Split s = blobs(60, 3, 3, 3.0, 1.0, 5);
  const PropagationGraph g = build_propagation_graph(s.x, 5, median_pairwise_distance(s.x));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    CHECK(g.neighbors[static_cast<std::size_t>(i)].size() >= 5);
    for (const auto& [j, w] : g.neighbors[static_cast<std::size_t>(i)]) {
      CHECK(j != i);
      CHECK(w > 0.0);
      CHECK(w <= 1.0);
      const double d2 = (s.x.row(i) - s.x.row(j)).squaredNorm();
      CHECK(w == doctest::Approx(std::exp(-d2 / (2 * g.sigma * g.sigma))));
      bool back = false;
      for (const auto& [k, w2] : g.neighbors[static_cast<std::size_t>(j)]) back |= k == i && w2 == w;
      CHECK(back);
    }
  }
  CHECK_THROWS_AS(build_propagation_graph(s.x, 60, 1.0), Error);
}

TEST_CASE("median pairwise distance on a line") {
  // Sorted distances 1,1,1,2,2,3: the median is the mean of the middle pair.
  CHECK(median_pairwise_distance(line({0, 1, 2, 3})) == doctest::Approx(1.5));
  CHECK(median_pairwise_distance(line({0, 1, 3})) == doctest::Approx(2.0));
}

TEST_CASE("propagation converges to the harmonic solution") {
  const Split s = blobs(40, 2, 2, 2.0, 1.0, 6);
  const PropagationGraph g = build_propagation_graph(s.x, 4, 1.5);
  const std::vector<std::pair<Eigen::Index, int>> seeds{{0, s.y[0]}, {1, s.y[1]}, {2, 1 - s.y[1]}};
  const Matrix f = propagate_labels(g, seeds, 2, 100000, 1e-12);
  const Matrix oracle = harmonic_oracle(g, seeds, 2);
  CHECK((f - oracle).cwiseAbs().maxCoeff() < 1e-6);
  for (const auto& [i, c] : seeds) CHECK(f(i, c) == 1.0);
}

TEST_CASE("propagation on a symmetric chain splits at the midpoint") {
  const PropagationGraph g = build_propagation_graph(line({0, 1, 2, 3, 4}), 2, 1.0);
  const Matrix f = propagate_labels(g, {{0, 0}, {4, 1}}, 2, 10000, 1e-12);
  CHECK(f(2, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(f(1, 0) > 0.5);
  CHECK(f(3, 1) > 0.5);
}

TEST_CASE("propagation keeps components apart") {
  const PropagationGraph g = build_propagation_graph(line({0, 1, 2, 100, 101, 102}), 2, 1.0);
  const Matrix f = propagate_labels(g, {{0, 0}, {5, 1}}, 2, 1000, 1e-12);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(f(i, 0) > 0.999);
  for (Eigen::Index i = 3; i < 6; ++i) CHECK(f(i, 1) > 0.999);
}

TEST_CASE("label propagation ignores train row order") {
  BundleSpec spec;
  spec.train = blobs(80, 2, 2, 4.0, 1.0, 7);
  spec.val = blobs(10, 2, 2, 4.0, 1.0, 8);
  const WeakLabelOutput a = label_propagation(make_bundle(spec));
  BundleSpec rev = spec;
  rev.train.x = spec.train.x.colwise().reverse();
  rev.train.y.assign(spec.train.y.rbegin(), spec.train.y.rend());
  const WeakLabelOutput b = label_propagation(make_bundle(rev));
  const auto n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<Eigen::Index>(n - 1 - i);
    CHECK(a.posterior(static_cast<Eigen::Index>(i), 0) == doctest::Approx(b.posterior(j, 0)).epsilon(1e-6));
  }
  CHECK(a.coverage == 1.0);
  CHECK(accuracy_covered(a, spec.train.y) > 0.9);
}

TEST_CASE("zero-shot argmax examples") {
  Matrix logits(3, 2);
  logits << 2, -1, 0.5, 0.5, -3, 4;
  const WeakLabelOutput out = zero_shot_argmax(FeatureMatrix(logits, "external:logits"), 2);
  CHECK(out.hard == std::vector<int>{0, 0, 1});
  CHECK(out.posterior(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))));
  CHECK(out.posterior(1, 0) == doctest::Approx(0.5));
  CHECK(out.coverage == 1.0);
}

TEST_CASE("zero-shot argmax ignores per-row shifts") {
  const Split s = blobs(30, 4, 4, 1.0, 1.0, 9);
  Matrix shifted = s.x;
  for (Eigen::Index i = 0; i < shifted.rows(); ++i) shifted.row(i).array() += 7.0 * static_cast<double>(i % 5) - 10.0;
  const auto a = zero_shot_argmax(FeatureMatrix(s.x, "external:l"), 4);
  const auto b = zero_shot_argmax(FeatureMatrix(shifted, "external:l"), 4);
  CHECK(a.hard == b.hard);
  CHECK((a.posterior - b.posterior).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zero-shot rejects a width mismatch") {
  const FeatureMatrix logits(Matrix::Zero(3, 5), "raw");
  try {
    zero_shot_argmax(logits, 2);
    FAIL("expected an incompatibility");
  } catch (const IncompatibleError& e) {
    CHECK(e.code() == "logit_width");
    CHECK(std::string(e.what()).find("logit width mismatch") != std::string::npos);
  }
}
