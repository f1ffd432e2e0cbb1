#include "autows/goggles_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "autows/error.hpp"
#include "autows/random.hpp"

namespace autows {
namespace {

Matrix kmeans_plus_plus(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.row(0) = x.row(first);
  taken[static_cast<std::size_t>(first)] = 1;
  Eigen::VectorXd dist = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (dist(i) <= 0.0) continue;
        pick = i;
        if (u < dist(i)) break;
        u -= dist(i);
      }
    } else {
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) pick = i;
      }
    }
    centers.row(c) = x.row(pick);
    taken[static_cast<std::size_t>(pick)] = 1;
    dist = dist.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

int nearest(const Matrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& point, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

ClusterModel run_kmeans(const Matrix& x, int k, std::uint64_t seed, const ClusterOptions& options) {
  Rng rng(seed);
  Matrix centers = kmeans_plus_plus(x, k, rng);
  ClusterModel model;
  model.method = ClusterMethod::kmeans;
  model.clusters = k;
  model.seed = seed;
  model.assignments.assign(static_cast<std::size_t>(x.rows()), 0);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double d = 0.0;
      model.assignments[static_cast<std::size_t>(i)] = nearest(centers, x.row(i), &d);
      inertia += d;
    }
    model.iterations_run = iter;
    if (previous - inertia < options.tol) break;
    previous = inertia;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int a = model.assignments[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      counts[static_cast<std::size_t>(a)] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0.0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  }
  return model;
}

ClusterModel run_gmm(const Matrix& x, int k, std::uint64_t seed, const ClusterOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Rng rng(seed);
  Matrix means = kmeans_plus_plus(x, k, rng);
  const Eigen::RowVectorXd global_mean = x.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((x.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(n))
          .max(options.variance_floor);
  Matrix vars = global_var.replicate(k, 1);
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(k, 1.0 / k);

  ClusterModel model;
  model.method = ClusterMethod::gmm;
  model.clusters = k;
  model.seed = seed;
  Matrix resp(n, k);
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    // E-step
    Eigen::VectorXd log_norm(k);
    Matrix inv_var = vars.cwiseInverse();
    for (int c = 0; c < k; ++c) {
      log_norm(c) = std::log(weights(c)) - 0.5 * (static_cast<double>(d) * log_2pi + vars.row(c).array().log().sum());
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c) {
        resp(i, c) = log_norm(c) - 0.5 * ((x.row(i) - means.row(c)).array().square() * inv_var.row(c).array()).sum();
      }
      const double top = resp.row(i).maxCoeff();
      const double z = top + std::log((resp.row(i).array() - top).exp().sum());
      resp.row(i) = (resp.row(i).array() - z).exp();
      ll += z;
    }
    if (!std::isfinite(ll)) throw Error("GMM EM diverged: non-finite log-likelihood");
    const bool converged = !model.log_likelihood_trace.empty() && ll - model.log_likelihood_trace.back() < options.tol;
    model.log_likelihood_trace.push_back(ll);
    model.iterations_run = iter;
    if (converged || iter == options.max_iter) break;

    // M-step
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (int c = 0; c < k; ++c) {
      if (nk(c) <= 1e-300) continue;  // keep parameters of an empty component
      weights(c) = nk(c) / static_cast<double>(n);
      means.row(c) = (resp.col(c).transpose() * x) / nk(c);
      const Matrix centered = x.rowwise() - means.row(c);
      vars.row(c) = ((resp.col(c).transpose() * centered.array().square().matrix()) / nk(c))
                        .array()
                        .max(options.variance_floor)
                        .matrix();
    }
    weights /= weights.sum();
  }

  model.responsibilities = resp;
  model.assignments.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (int c = 1; c < k; ++c) {
      if (resp(i, c) > resp(i, best)) best = c;
    }
    model.assignments[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return model;
}

ClusterModel run_spectral(const Matrix& features, int k, std::uint64_t seed, const ClusterOptions& options) {
  const Eigen::Index n = features.rows();
  if (features.cols() % n != 0) {
    throw Error("spectral clustering expects stacked n x n affinity blocks");
  }
  const Eigen::Index blocks = features.cols() / n;
  Matrix affinity = Matrix::Zero(n, n);
  for (Eigen::Index b = 0; b < blocks; ++b) affinity += features.middleCols(b * n, n);
  affinity /= static_cast<double>(blocks);

  Matrix w = (affinity.array() + 1.0) / 2.0;
  w = (w + w.transpose()) / 2.0;
  const Eigen::VectorXd inv_sqrt_deg = w.rowwise().sum().array().max(1e-300).rsqrt();
  // Bottom eigenvectors of I - D^-1/2 W D^-1/2 are the top ones of the normalized W.
  const Matrix normalized = inv_sqrt_deg.asDiagonal() * w * inv_sqrt_deg.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normalized);
  if (eig.info() != Eigen::Success) throw Error("spectral eigendecomposition failed");
  Matrix embedding = eig.eigenvectors().rightCols(k).rowwise().reverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  ClusterModel model = run_kmeans(embedding, k, seed, options);
  model.method = ClusterMethod::spectral;
  return model;
}

}  // namespace

AffinityMatrix build_affinity(const Matrix& features, std::string source) {
  if (features.rows() < 2) throw Error("affinity needs at least 2 rows");
  const Eigen::Index n = features.rows();
  Matrix normalized = features;
  std::vector<char> zero(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = features.row(i).norm();
    if (norm > 0.0) {
      normalized.row(i) /= norm;
    } else {
      normalized.row(i).setZero();
      zero[static_cast<std::size_t>(i)] = 1;
    }
  }
  AffinityMatrix a{normalized * normalized.transpose(), std::move(source)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = std::clamp((a.values(i, j) + a.values(j, i)) / 2.0, -1.0, 1.0);
      a.values(i, j) = v;
      a.values(j, i) = v;
    }
    a.values(i, i) = 1.0;
  }
  return a;
}

AffinityMatrix build_affinity(const FeatureMatrix& features) {
  return build_affinity(features.values(), features.provenance());
}

Matrix stack_affinities(std::span<const AffinityMatrix> affinities) {
  if (affinities.empty()) throw Error("no affinity matrices to stack");
  const Eigen::Index n = affinities.front().values.rows();
  Matrix out(n, n * static_cast<Eigen::Index>(affinities.size()));
  for (std::size_t b = 0; b < affinities.size(); ++b) {
    const auto& a = affinities[b].values;
    if (a.rows() != n || a.cols() != n) {
      throw Error("affinity size mismatch: expected " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                  std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    out.middleCols(static_cast<Eigen::Index>(b) * n, n) = a;
  }
  return out;
}

std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::gmm: return "gmm";
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::spectral: return "spectral";
  }
  return "?";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "gmm") return ClusterMethod::gmm;
  if (name == "kmeans") return ClusterMethod::kmeans;
  if (name == "spectral") return ClusterMethod::spectral;
  throw Error("unknown clustering method: " + std::string(name));
}

ClusterModel fit_cluster(const Matrix& features, int clusters, ClusterMethod method, std::uint64_t seed,
                         const ClusterOptions& options) {
  if (clusters < 1) throw Error("cluster count must be at least 1");
  if (clusters > features.rows()) {
    throw Error("cluster count K=" + std::to_string(clusters) + " exceeds n=" + std::to_string(features.rows()));
  }
  switch (method) {
    case ClusterMethod::gmm: return run_gmm(features, clusters, seed, options);
    case ClusterMethod::kmeans: return run_kmeans(features, clusters, seed, options);
    case ClusterMethod::spectral: return run_spectral(features, clusters, seed, options);
  }
  throw Error("unknown clustering method");
}

ClusterModel map_clusters(ClusterModel model, std::span<const Eigen::Index> labeled_idx, std::span<const int> labels,
                          int classes) {
  if (labeled_idx.empty()) throw Error("cluster mapping needs labeled points");
  if (labeled_idx.size() != labels.size()) throw Error("labeled indices and labels differ in length");
  const auto k = static_cast<std::size_t>(model.clusters);
  const auto c = static_cast<std::size_t>(classes);
  std::vector<std::vector<int>> counts(k, std::vector<int>(c, 0));
  std::vector<int> global(c, 0);
  for (std::size_t t = 0; t < labeled_idx.size(); ++t) {
    const int label = labels[t];
    if (label < 0 || label >= classes) throw Error("label out of range in cluster mapping");
    const int cluster = model.assignments.at(static_cast<std::size_t>(labeled_idx[t]));
    ++counts[static_cast<std::size_t>(cluster)][static_cast<std::size_t>(label)];
    ++global[static_cast<std::size_t>(label)];
  }
  const auto argmax = [](const std::vector<int>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  const int fallback = argmax(global);
  model.cluster_to_class.assign(k, fallback);
  for (std::size_t j = 0; j < k; ++j) {
    const bool any = std::any_of(counts[j].begin(), counts[j].end(), [](int v) { return v > 0; });
    if (any) model.cluster_to_class[j] = argmax(counts[j]);
  }
  return model;
}

WeakLabelOutput goggles_predict(const DatasetBundle& bundle, const GogglesConfig& config) {
  return goggles_predict(std::span<const DatasetBundle>(&bundle, 1), config);
}

WeakLabelOutput goggles_predict(std::span<const DatasetBundle> views, const GogglesConfig& config,
                                ClusterModel* model_out) {
  if (views.empty()) throw Error("goggles needs at least one view");
  const DatasetBundle& base = views.front();
  const Eigen::Index m = base.val_features.rows();
  const Eigen::Index n = base.train_features.rows();
  const int classes = base.classes();
  if (m == 0) throw Error("empty validation labels");

  std::vector<AffinityMatrix> affinities;
  for (const auto& view : views) {
    if (view.val_features.rows() != m || view.train_features.rows() != n || view.classes() != classes ||
        view.val_labels.values != base.val_labels.values) {
      throw Error("goggles views must share splits and labels");
    }
    Matrix all(m + n, view.train_features.cols());
    all << view.val_features.values(), view.train_features.values();
    affinities.push_back(build_affinity(all, view.train_features.provenance()));
  }
  const Matrix stacked = stack_affinities(affinities);
  affinities.clear();

  ClusterModel model = fit_cluster(stacked, classes, config.method, config.seed, config.options);
  std::vector<Eigen::Index> labeled(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) labeled[static_cast<std::size_t>(i)] = i;
  model = map_clusters(std::move(model), labeled, base.val_labels.values, classes);

  Matrix posterior = Matrix::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index row = m + i;
    if (model.method == ClusterMethod::gmm) {
      for (int c = 0; c < model.clusters; ++c) {
        posterior(i, model.cluster_to_class[static_cast<std::size_t>(c)]) += model.responsibilities(row, c);
      }
      posterior.row(i) /= posterior.row(i).sum();
    } else {
      const int cluster = model.assignments[static_cast<std::size_t>(row)];
      posterior(i, model.cluster_to_class[static_cast<std::size_t>(cluster)]) = 1.0;
    }
  }
  if (model_out) *model_out = std::move(model);
  return covered_output(std::move(posterior));
}

nlohmann::json to_json(const ClusterModel& model) {
  return {{"method", std::string(to_string(model.method))},
          {"clusters", model.clusters},
          {"seed", model.seed},
          {"cluster_to_class", model.cluster_to_class},
          {"iterations_run", model.iterations_run}};
}

}  // namespace autows
