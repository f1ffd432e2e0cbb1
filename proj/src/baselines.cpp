#include "autows/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autows/error.hpp"

namespace autows {

WeakLabelOutput few_shot_logistic(const DatasetBundle& bundle, const LogisticOptions& options) {
  const Matrix& x = bundle.val_features.values();
  FeatureSubset all(static_cast<std::size_t>(x.cols()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const WeakLearner model = train_logistic(x, bundle.val_labels.values, bundle.classes(), all, options);
  return covered_output(predict_proba(model, bundle.train_features.values()));
}

double median_pairwise_distance(const Matrix& points, Eigen::Index max_points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index take = std::min(n, max_points);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(take));
  for (Eigen::Index t = 0; t < take; ++t) idx[static_cast<std::size_t>(t)] = t * n / take;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(take * (take - 1) / 2));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) dists.push_back((points.row(idx[a]) - points.row(idx[b])).norm());
  }
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) {
    median = (median + *std::max_element(dists.begin(), mid)) / 2.0;
  }
  return median > 0.0 ? median : 1.0;
}

PropagationGraph build_propagation_graph(const Matrix& points, int k, double sigma) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k >= n) throw Error("propagation graph needs 1 <= k < number of points");
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  PropagationGraph g;
  g.k = k;
  g.sigma = sigma;
  g.neighbors.resize(static_cast<std::size_t>(n));

  const Eigen::VectorXd sq = points.rowwise().squaredNorm();
  std::vector<std::vector<std::pair<Eigen::Index, double>>> raw(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Eigen::Index>> cand(static_cast<std::size_t>(n - 1));
  const double denom = 2.0 * sigma * sigma;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t t = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * points.row(i).dot(points.row(j)));
      cand[t++] = {d2, j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int t2 = 0; t2 < k; ++t2) {
      const auto [d2, j] = cand[static_cast<std::size_t>(t2)];
      const double w = std::exp(-d2 / denom);
      raw[static_cast<std::size_t>(i)].push_back({j, w});
      raw[static_cast<std::size_t>(j)].push_back({i, w});
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& r = raw[static_cast<std::size_t>(i)];
    std::sort(r.begin(), r.end());
    auto& out = g.neighbors[static_cast<std::size_t>(i)];
    for (const auto& e : r) {
      if (out.empty() || out.back().first != e.first) out.push_back(e);
    }
  }
  return g;
}

Matrix propagate_labels(const PropagationGraph& graph, const std::vector<std::pair<Eigen::Index, int>>& seeds,
                        int classes, int max_iter, double tol) {
  if (seeds.empty()) throw Error("label propagation needs labeled points");
  const Eigen::Index n = graph.size();
  Matrix f = Matrix::Zero(n, classes);
  const auto clamp = [&](Matrix& m) {
    for (const auto& [i, c] : seeds) {
      m.row(i).setZero();
      m(i, c) = 1.0;
    }
  };
  clamp(f);
  Matrix next(n, classes);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(i).setZero();
      for (const auto& [j, w] : graph.neighbors[static_cast<std::size_t>(i)]) next.row(i) += w * f.row(j);
      const double s = next.row(i).sum();
      if (s > 0.0) next.row(i) /= s;
    }
    clamp(next);
    const double change = (next - f).cwiseAbs().maxCoeff();
    f.swap(next);
    if (change < tol) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (f.row(i).sum() <= 0.0) f.row(i).setConstant(1.0 / classes);
  }
  return f;
}

WeakLabelOutput label_propagation(const DatasetBundle& bundle, const PropagationOptions& options) {
  const Eigen::Index m = bundle.val_features.rows();
  const Eigen::Index n = bundle.train_features.rows();
  if (m == 0) throw Error("label propagation needs labeled points");
  Matrix all(m + n, bundle.train_features.cols());
  all << bundle.val_features.values(), bundle.train_features.values();
  const double sigma = options.sigma > 0.0 ? options.sigma : median_pairwise_distance(all);
  const PropagationGraph graph = build_propagation_graph(all, options.k, sigma);
  std::vector<std::pair<Eigen::Index, int>> seeds;
  for (Eigen::Index i = 0; i < m; ++i) seeds.push_back({i, bundle.val_labels.values[static_cast<std::size_t>(i)]});
  const Matrix f = propagate_labels(graph, seeds, bundle.classes(), options.max_iter, options.tol);
  return covered_output(f.bottomRows(n));
}

WeakLabelOutput zero_shot_argmax(const FeatureMatrix& logits, int classes) {
  if (logits.cols() != classes) {
    throw IncompatibleError("logit_width", "logit width mismatch: " + std::to_string(logits.cols()) +
                                               " columns for " + std::to_string(classes) + " classes");
  }
  Matrix p = logits.values();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double top = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - top).exp();
    p.row(i) /= p.row(i).sum();
  }
  // Hard labels come from the raw logits so exact ties stay ties.
  WeakLabelOutput out = covered_output(p);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < classes; ++c) {
      if (logits.values()(i, c) > logits.values()(i, best)) best = c;
    }
    out.hard[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace autows
