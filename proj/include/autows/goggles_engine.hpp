#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autows/data_model.hpp"
#include "autows/label_model.hpp"

namespace autows {

// Pairwise cosine similarities. Zero rows get a zero row and column with the
// diagonal entry forced to 1.
struct AffinityMatrix {
  Matrix values;
  std::string source;
};

AffinityMatrix build_affinity(const Matrix& features, std::string source);
AffinityMatrix build_affinity(const FeatureMatrix& features);

// Row-wise concatenation: row i of the result is [A1(i, :), A2(i, :), ...].
Matrix stack_affinities(std::span<const AffinityMatrix> affinities);

enum class ClusterMethod { gmm, kmeans, spectral };

std::string_view to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(std::string_view name);

struct ClusterOptions {
  int max_iter = 300;
  double tol = 1e-6;
  double variance_floor = 1e-6;
};

struct ClusterModel {
  ClusterMethod method = ClusterMethod::gmm;
  int clusters = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;
  Matrix responsibilities;  // gmm only; n x K
  std::vector<int> cluster_to_class;  // empty until map_clusters
  int iterations_run = 0;
  std::vector<double> log_likelihood_trace;  // gmm only
};

// gmm: diagonal-covariance EM from k-means++ seeds. kmeans: Lloyd iterations
// from k-means++ seeds. spectral: k-means on the row-normalized bottom-K
// eigenvectors of the symmetric normalized Laplacian of (A + 1) / 2, where A
// is the mean of the n x n affinity blocks that make up `features`.
ClusterModel fit_cluster(const Matrix& features, int clusters, ClusterMethod method, std::uint64_t seed,
                         const ClusterOptions& options = {});

// Each cluster takes the majority label of its labeled members; clusters
// without labeled members take the overall majority label. Ties go to the
// lower class index.
ClusterModel map_clusters(ClusterModel model, std::span<const Eigen::Index> labeled_idx,
                          std::span<const int> labels, int classes);

struct GogglesConfig {
  ClusterMethod method = ClusterMethod::gmm;
  std::uint64_t seed = 0;
  ClusterOptions options;
};

// Clusters the labeled and unlabeled points together (one affinity matrix per
// view, stacked), maps clusters to classes with the labeled points and labels
// every train point. Coverage is always 1.
WeakLabelOutput goggles_predict(const DatasetBundle& bundle, const GogglesConfig& config);
// Multi-embedding variant: every view must share the same splits and labels.
WeakLabelOutput goggles_predict(std::span<const DatasetBundle> views, const GogglesConfig& config,
                                ClusterModel* model_out = nullptr);

nlohmann::json to_json(const ClusterModel& model);

}  // namespace autows
