#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "autows/error.hpp"
#include "autows/goggles_engine.hpp"
#include "synth.hpp"

using namespace autows;
using namespace autows::testing;

namespace {

constexpr ClusterMethod kMethods[] = {ClusterMethod::gmm, ClusterMethod::kmeans, ClusterMethod::spectral};

// Fraction of points whose cluster agrees with the best one-to-one relabeling
// (brute force over permutations of at most 3 labels).
double matched_fraction(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0;
  do {
    double hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hits += perm[static_cast<std::size_t>(a[i])] == b[i];
    best = std::max(best, hits / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("cosine affinity on hand rows") {
  Matrix x(4, 2);
  x << 1, 2, 1, 2, -2, 1, -1, -2;
  const AffinityMatrix a = build_affinity(x, "raw");
  CHECK(a.values(0, 1) == doctest::Approx(1.0));
  CHECK(a.values(0, 2) == doctest::Approx(0.0));
  CHECK(a.values(0, 3) == doctest::Approx(-1.0));
  CHECK(a.values == a.values.transpose());
}

TEST_CASE("stacking affinities") {
  const AffinityMatrix a = build_affinity(Matrix::Random(3, 2), "a");
  const AffinityMatrix b = build_affinity(Matrix::Random(3, 4), "b");
  const std::vector<AffinityMatrix> one{a};
  CHECK(stack_affinities(one) == a.values);
  const std::vector<AffinityMatrix> two{a, b};
  const Matrix s = stack_affinities(two);
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 6);
  CHECK(s.leftCols(3) == a.values);
  CHECK(s.rightCols(3) == b.values);
  const std::vector<AffinityMatrix> bad{a, build_affinity(Matrix::Random(4, 2), "c")};
  CHECK_THROWS_AS(stack_affinities(bad), Error);
}

TEST_CASE("well separated blobs are recovered by every clustering method") {
  const Split s = blobs(120, 2, 2, 8.0, 0.5, 41);
  const Matrix features = build_affinity(s.x, "raw").values;
  for (ClusterMethod m : kMethods) {
    const ClusterModel model = fit_cluster(features, 2, m, 3);
    CHECK(matched_fraction(model.assignments, s.y, 2) == 1.0);
  }
}

TEST_CASE("kmeans with one cluster per point") {
  Matrix x(5, 1);
  x << 0, 10, 20, 30, 40;
  const ClusterModel model = fit_cluster(x, 5, ClusterMethod::kmeans, 1);
  std::set<int> distinct(model.assignments.begin(), model.assignments.end());
  CHECK(distinct.size() == 5);
  CHECK_THROWS_AS(fit_cluster(x, 6, ClusterMethod::kmeans, 1), Error);
}

TEST_CASE("gmm log-likelihood never decreases") {
  const Split s = blobs(200, 3, 3, 3.0, 1.0, 42);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ClusterModel model = fit_cluster(s.x, 3, ClusterMethod::gmm, seed);
    for (std::size_t i = 1; i < model.log_likelihood_trace.size(); ++i) {
      CHECK(model.log_likelihood_trace[i] >= model.log_likelihood_trace[i - 1] - 1e-9);
    }
    CHECK(model.responsibilities.rows() == 200);
    CHECK((model.responsibilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("cluster mapping") {
  ClusterModel model;
  model.clusters = 3;
  model.assignments = {0, 0, 1, 1, 2, 2, 0, 1};

  SUBCASE("pure clusters") {
    const std::vector<Eigen::Index> idx{0, 2, 4};
    const std::vector<int> labels{2, 0, 1};
    CHECK(map_clusters(model, idx, labels, 3).cluster_to_class == std::vector<int>{2, 0, 1});
  }
  SUBCASE("cluster without labels falls back to the global majority") {
    const std::vector<Eigen::Index> idx{0, 1, 2};
    const std::vector<int> labels{1, 1, 0};
    CHECK(map_clusters(model, idx, labels, 2).cluster_to_class == std::vector<int>{1, 0, 1});
  }
  SUBCASE("mixed clusters match a direct tally") {
    const std::vector<Eigen::Index> idx{0, 1, 6, 2, 3, 7, 4};
    const std::vector<int> labels{0, 1, 1, 2, 2, 0, 0};
    std::map<int, std::map<int, int>> tally;
    for (std::size_t t = 0; t < idx.size(); ++t) ++tally[model.assignments[static_cast<std::size_t>(idx[t])]][labels[t]];
    std::vector<int> expected;
    for (int k = 0; k < 3; ++k) {
      int best = -1, best_count = -1;
      for (const auto& [label, count] : tally[k])
        if (count > best_count) best = label, best_count = count;
      expected.push_back(best);
    }
    CHECK(map_clusters(model, idx, labels, 3).cluster_to_class == expected);
  }
}

TEST_CASE("goggles prediction covers everything and separates blobs") {
  BundleSpec spec;
  spec.classes = 3;
  spec.train = blobs(300, 3, 3, 6.0, 0.7, 43);
  spec.val = blobs(30, 3, 3, 6.0, 0.7, 44);
  const DatasetBundle b = make_bundle(spec);
  for (ClusterMethod m : kMethods) {
    const WeakLabelOutput out = goggles_predict(b, GogglesConfig{m, 9, {}});
    CHECK(out.coverage == 1.0);
    CHECK(accuracy_covered(out, spec.train.y) >= 0.95);
    CHECK((out.posterior.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("goggles with a single labeled class predicts it everywhere") {
  BundleSpec spec;
  spec.train = blobs(80, 2, 2, 4.0, 1.0, 45);
  spec.val = blobs(10, 2, 2, 4.0, 1.0, 46);
  for (auto& y : spec.val.y) y = 1;
  const WeakLabelOutput out = goggles_predict(make_bundle(spec), GogglesConfig{});
  for (int h : out.hard) CHECK(h == 1);
}

TEST_CASE("multi-view goggles stacks affinities") {
  BundleSpec spec;
  spec.train = blobs(100, 3, 2, 5.0, 0.7, 47);
  spec.val = blobs(20, 3, 2, 5.0, 0.7, 48);
  const DatasetBundle a = make_bundle(spec);
  BundleSpec other = spec;
  other.provenance = "pca";
  other.train.x = spec.train.x * 2.0;
  other.val.x = spec.val.x * 2.0;
  const std::vector<DatasetBundle> views{a, make_bundle(other)};
  ClusterModel model;
  const WeakLabelOutput out = goggles_predict(views, GogglesConfig{ClusterMethod::kmeans, 1, {}}, &model);
  CHECK(out.coverage == 1.0);
  CHECK(model.cluster_to_class.size() == 2);
  CHECK(accuracy_covered(out, spec.train.y) >= 0.95);
}
