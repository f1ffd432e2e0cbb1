#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autows/votes.hpp"

namespace autows {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// An n x d embedding matrix, one row per example, tagged with where the
// representation came from ("raw", "pca100", "external:clip_logits", ...).
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  // Throws autows::Error if empty, non-finite, or the provenance is blank.
  FeatureMatrix(Matrix values, std::string provenance);

  const Matrix& values() const { return values_; }
  const std::string& provenance() const { return provenance_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }

 private:
  Matrix values_;
  std::string provenance_;
};

struct LabelVector {
  std::vector<int> values;
  int classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return values.size(); }
  void validate() const;
};

struct DatasetBundle {
  std::string name;
  FeatureMatrix train_features;
  FeatureMatrix val_features;
  LabelVector val_labels;
  std::optional<LabelVector> train_labels;  // gold, evaluation only
  std::optional<FeatureMatrix> test_features;
  std::optional<LabelVector> test_labels;
  std::optional<VoteMatrix> external_votes;  // aligned to the train split

  int classes() const { return val_labels.classes; }
  void validate() const;
};

struct LoadOptions {
  // Empty selects "raw" when present, otherwise the first provenance in
  // lexicographic order.
  std::string provenance;
  bool standardize = false;
};

// Reads a JSON manifest:
//   {"name": ..., "classes": C, "class_names": [...],
//    "splits": {"train": {"features": {"raw": "x.csv", ...}, "labels": "y.txt"},
//               "val": {...}, "test": {...}},
//    "external_votes": "votes.csv"}
// Relative paths resolve against the manifest's directory. "train" and "val"
// are required; train labels, the test split and external votes are optional.
DatasetBundle load_bundle(const std::filesystem::path& manifest_path,
                          const LoadOptions& options = {});

std::vector<std::string> manifest_provenances(const std::filesystem::path& manifest_path);

// Restricts the labeled validation set to its first `budget` examples.
DatasetBundle with_label_budget(const DatasetBundle& bundle, std::size_t budget);

struct PcaModel {
  Vector mean;
  Matrix components;  // k x d, orthonormal rows
  Vector explained_variance;

  Eigen::Index k() const { return components.rows(); }
};

inline constexpr Eigen::Index kDefaultPcaDimensionCap = 4096;

// Exact eigendecomposition of the d x d sample covariance. Each component is
// oriented so that its largest-magnitude entry is positive.
PcaModel fit_pca(const FeatureMatrix& features, Eigen::Index k,
                 Eigen::Index max_dimension = kDefaultPcaDimensionCap);
FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& features);
Matrix inverse_pca(const PcaModel& model, const Matrix& projected);

// Per-column standardization statistics fitted on one split and applied to all.
struct Standardizer {
  Vector mean;
  Vector scale;  // floored at 1e-12
};
Standardizer fit_standardizer(const FeatureMatrix& features);
FeatureMatrix apply_standardizer(const Standardizer& s, const FeatureMatrix& features);

// Treats each row as a side x side image and reorders its rows and columns by
// the bit-reversal permutation of their indices. `side` must be a power of two.
FeatureMatrix bit_reversal_permute(const FeatureMatrix& features, Eigen::Index side);
std::size_t bit_reverse(std::size_t index, unsigned bits);

}  // namespace autows
