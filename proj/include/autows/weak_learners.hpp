#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace autows {

using Matrix = Eigen::MatrixXd;
using FeatureSubset = std::vector<Eigen::Index>;

enum class LearnerKind { stump, logistic, knn };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

// Axis-aligned split on one column of the restricted input.
struct StumpParams {
  Eigen::Index axis = 0;  // position within the feature subset
  double threshold = 0.0;  // x[axis] <= threshold goes left
  int left_class = 0;
  int right_class = 0;
};

// Multinomial logistic regression; weights are C x (D + 1) with the bias in
// the last column.
struct LogisticParams {
  Matrix weights;
};

struct KnnParams {
  Matrix points;
  std::vector<int> labels;
  int k = 1;
};

struct WeakLearner {
  LearnerKind kind = LearnerKind::stump;
  FeatureSubset feature_subset;  // strictly increasing column indices
  int classes = 2;
  std::variant<StumpParams, LogisticParams, KnnParams> params;
};

struct LogisticOptions {
  double l2 = 1e-3;
  int max_iter = 500;
  double tol = 1e-6;
};

inline constexpr int kDefaultKnnK = 5;

// x is already restricted to `subset` (one column per subset entry).
WeakLearner train_stump(const Matrix& x, std::span<const int> y, int classes, FeatureSubset subset);

// Full-batch gradient descent with Armijo backtracking from zero weights.
// If `loss_trace` is given it receives the objective after every accepted step
// (the first entry is the objective at zero).
WeakLearner train_logistic(const Matrix& x, std::span<const int> y, int classes,
                           FeatureSubset subset, const LogisticOptions& options = {},
                           std::vector<double>* loss_trace = nullptr);

WeakLearner train_knn(const Matrix& x, std::span<const int> y, int classes, FeatureSubset subset,
                      int k = kDefaultKnnK);

// Rows are class distributions. x has one column per feature-subset entry.
Matrix predict_proba(const WeakLearner& model, const Matrix& x);

Matrix restrict_columns(const Matrix& x, std::span<const Eigen::Index> subset);

// Mean cross-entropy plus (l2 / 2) * ||W without bias||^2, and its gradient.
double logistic_objective(const Matrix& weights, const Matrix& x, std::span<const int> y, double l2);
Matrix logistic_gradient(const Matrix& weights, const Matrix& x, std::span<const int> y, double l2);

nlohmann::json to_json(const WeakLearner& model);
WeakLearner learner_from_json(const nlohmann::json& j);

}  // namespace autows
