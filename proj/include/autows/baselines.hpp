#pragma once

#include <utility>
#include <vector>

#include "autows/data_model.hpp"
#include "autows/label_model.hpp"
#include "autows/weak_learners.hpp"

namespace autows {

// Logistic regression on the labeled validation set over all features,
// predicting the train split.
WeakLabelOutput few_shot_logistic(const DatasetBundle& bundle, const LogisticOptions& options = {});

// Symmetric k-nearest-neighbour graph with RBF weights exp(-d^2 / (2 sigma^2)).
struct PropagationGraph {
  std::vector<std::vector<std::pair<Eigen::Index, double>>> neighbors;  // sorted by index
  int k = 0;
  double sigma = 1.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(neighbors.size()); }
};

PropagationGraph build_propagation_graph(const Matrix& points, int k, double sigma);

// Median pairwise distance over an evenly strided subsample of at most
// `max_points` rows.
double median_pairwise_distance(const Matrix& points, Eigen::Index max_points = 500);

struct PropagationOptions {
  int k = 10;
  double sigma = 0.0;  // <= 0 selects median_pairwise_distance
  int max_iter = 1000;
  double tol = 1e-6;
};

// Clamped iteration F <- rownormalize(W F) with seed rows reset to their
// one-hot labels after every sweep. Rows that never receive mass (components
// without seeds) end uniform and take class 0.
Matrix propagate_labels(const PropagationGraph& graph, const std::vector<std::pair<Eigen::Index, int>>& seeds,
                        int classes, int max_iter, double tol);

// Propagation over the validation and train points together; returns the
// train split.
WeakLabelOutput label_propagation(const DatasetBundle& bundle, const PropagationOptions& options = {});

// Per-row argmax of externally supplied class logits (posterior = softmax).
// Throws IncompatibleError("logit_width") unless the width equals `classes`.
WeakLabelOutput zero_shot_argmax(const FeatureMatrix& logits, int classes);

}  // namespace autows
