#include "autows/weak_learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autows/error.hpp"

namespace autows {
namespace {

void check_training_input(const Matrix& x, std::span<const int> y, int classes,
                          const FeatureSubset& subset) {
  if (x.rows() == 0 || y.empty()) throw Error("empty training input");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error("training rows and labels differ in length");
  if (static_cast<std::size_t>(x.cols()) != subset.size()) {
    throw Error("training input has " + std::to_string(x.cols()) + " columns for a subset of " +
                std::to_string(subset.size()));
  }
  if (classes < 2) throw Error("learner needs at least 2 classes");
  for (std::size_t i = 1; i < subset.size(); ++i) {
    if (subset[i] <= subset[i - 1]) throw Error("feature subset must be strictly increasing");
  }
  for (int label : y) {
    if (label < 0 || label >= classes) throw Error("training label out of range");
  }
}

int argmax_count(const std::vector<int>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// Row-wise softmax of the logits for inputs x (without the bias column).
Matrix softmax_rows(const Matrix& weights, const Matrix& x) {
  const Eigen::Index d = x.cols();
  Matrix logits = x * weights.leftCols(d).transpose();
  logits.rowwise() += weights.col(d).transpose();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::stump: return "stump";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::knn: return "knn";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "stump") return LearnerKind::stump;
  if (name == "logistic") return LearnerKind::logistic;
  if (name == "knn") return LearnerKind::knn;
  throw Error("unknown learner kind: " + std::string(name));
}

Matrix restrict_columns(const Matrix& x, std::span<const Eigen::Index> subset) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    if (subset[j] < 0 || subset[j] >= x.cols()) {
      throw Error("feature index " + std::to_string(subset[j]) + " out of range for width " +
                  std::to_string(x.cols()));
    }
    out.col(static_cast<Eigen::Index>(j)) = x.col(subset[j]);
  }
  return out;
}

WeakLearner train_stump(const Matrix& x, std::span<const int> y, int classes, FeatureSubset subset) {
  check_training_input(x, y, classes, subset);
  const Eigen::Index n = x.rows();

  std::vector<int> total(static_cast<std::size_t>(classes), 0);
  for (int label : y) ++total[static_cast<std::size_t>(label)];
  const int majority = argmax_count(total);

  StumpParams best{0, x(0, 0), majority, majority};
  long best_correct = -1;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index axis = 0; axis < x.cols(); ++axis) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return x(a, axis) < x(b, axis); });
    std::vector<int> left(static_cast<std::size_t>(classes), 0);
    for (Eigen::Index pos = 0; pos + 1 < n; ++pos) {
      const Eigen::Index i = order[static_cast<std::size_t>(pos)];
      ++left[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
      const double here = x(i, axis);
      const double next = x(order[static_cast<std::size_t>(pos + 1)], axis);
      if (!(next > here)) continue;
      std::vector<int> right(total);
      for (int c = 0; c < classes; ++c) right[static_cast<std::size_t>(c)] -= left[static_cast<std::size_t>(c)];
      const int lc = argmax_count(left);
      const int rc = argmax_count(right);
      const long correct = left[static_cast<std::size_t>(lc)] + right[static_cast<std::size_t>(rc)];
      const double threshold = here + (next - here) / 2.0;
      const bool better = correct > best_correct ||
                          (correct == best_correct && threshold < best.threshold);
      if (better) {
        best_correct = correct;
        best = StumpParams{axis, threshold, lc, rc};
      }
    }
  }
  return WeakLearner{LearnerKind::stump, std::move(subset), classes, best};
}

double logistic_objective(const Matrix& weights, const Matrix& x, std::span<const int> y, double l2) {
  const Eigen::Index d = x.cols();
  Matrix logits = x * weights.leftCols(d).transpose();
  logits.rowwise() += weights.col(d).transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    const double lse = top + std::log((logits.row(i).array() - top).exp().sum());
    loss += lse - logits(i, y[static_cast<std::size_t>(i)]);
  }
  loss /= static_cast<double>(x.rows());
  loss += 0.5 * l2 * weights.leftCols(d).squaredNorm();
  return loss;
}

Matrix logistic_gradient(const Matrix& weights, const Matrix& x, std::span<const int> y, double l2) {
  const Eigen::Index d = x.cols();
  Matrix residual = softmax_rows(weights, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) residual(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Matrix grad(weights.rows(), weights.cols());
  grad.leftCols(d) = inv_n * residual.transpose() * x + l2 * weights.leftCols(d);
  grad.col(d) = inv_n * residual.colwise().sum().transpose();
  return grad;
}

WeakLearner train_logistic(const Matrix& x, std::span<const int> y, int classes, FeatureSubset subset,
                           const LogisticOptions& options, std::vector<double>* loss_trace) {
  check_training_input(x, y, classes, subset);
  if (options.l2 < 0.0) throw Error("l2 must be nonnegative");

  Matrix w = Matrix::Zero(classes, x.cols() + 1);
  double loss = logistic_objective(w, x, y, options.l2);
  if (loss_trace) loss_trace->push_back(loss);
  double step = 1.0;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Matrix grad = logistic_gradient(w, x, y, options.l2);
    const double gnorm2 = grad.squaredNorm();
    if (std::sqrt(gnorm2) < options.tol) break;

    step = std::min(step * 2.0, 1e6);
    Matrix trial;
    double trial_loss = 0.0;
    bool accepted = false;
    while (step > 1e-20) {
      trial = w - step * grad;
      trial_loss = logistic_objective(trial, x, y, options.l2);
      if (!std::isfinite(trial_loss)) {
        step /= 2.0;
        continue;
      }
      if (trial_loss <= loss - 0.5 * step * gnorm2) {
        accepted = true;
        break;
      }
      step /= 2.0;
    }
    if (!accepted) break;
    w = std::move(trial);
    loss = trial_loss;
    if (loss_trace) loss_trace->push_back(loss);
  }
  if (!std::isfinite(loss) || !w.allFinite()) {
    throw Error("non-finite logistic loss; check feature scaling");
  }
  return WeakLearner{LearnerKind::logistic, std::move(subset), classes, LogisticParams{std::move(w)}};
}

WeakLearner train_knn(const Matrix& x, std::span<const int> y, int classes, FeatureSubset subset, int k) {
  check_training_input(x, y, classes, subset);
  if (k < 1) throw Error("knn k must be at least 1");
  if (k > x.rows()) {
    throw Error("knn k=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " examples");
  }
  return WeakLearner{LearnerKind::knn, std::move(subset), classes,
                     KnnParams{x, std::vector<int>(y.begin(), y.end()), k}};
}

Matrix predict_proba(const WeakLearner& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.feature_subset.size()) {
    throw Error("dimension mismatch: learner expects " + std::to_string(model.feature_subset.size()) +
                " columns, got " + std::to_string(x.cols()));
  }
  const Eigen::Index n = x.rows();
  Matrix out = Matrix::Zero(n, model.classes);

  if (const auto* s = std::get_if<StumpParams>(&model.params)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, x(i, s->axis) <= s->threshold ? s->left_class : s->right_class) = 1.0;
    }
  } else if (const auto* lr = std::get_if<LogisticParams>(&model.params)) {
    out = softmax_rows(lr->weights, x);
  } else {
    const auto& knn = std::get<KnnParams>(model.params);
    const Eigen::Index stored = knn.points.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(stored));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < stored; ++j) {
        dist[static_cast<std::size_t>(j)] = {(knn.points.row(j) - x.row(i)).squaredNorm(), j};
      }
      std::partial_sort(dist.begin(), dist.begin() + knn.k, dist.end());
      for (int t = 0; t < knn.k; ++t) {
        out(i, knn.labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(t)].second)]) += 1.0;
      }
      out.row(i) /= static_cast<double>(knn.k);
    }
  }
  return out;
}

nlohmann::json to_json(const WeakLearner& model) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(model.kind));
  j["subset"] = model.feature_subset;
  j["classes"] = model.classes;
  if (const auto* s = std::get_if<StumpParams>(&model.params)) {
    j["axis"] = s->axis;
    j["feature"] = model.feature_subset.at(static_cast<std::size_t>(s->axis));
    j["threshold"] = s->threshold;
    j["left_class"] = s->left_class;
    j["right_class"] = s->right_class;
  } else if (const auto* lr = std::get_if<LogisticParams>(&model.params)) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < lr->weights.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < lr->weights.cols(); ++c) row.push_back(lr->weights(r, c));
      rows.push_back(row);
    }
    j["weights"] = rows;
  } else {
    const auto& knn = std::get<KnnParams>(model.params);
    j["k"] = knn.k;
    j["labels"] = knn.labels;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < knn.points.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < knn.points.cols(); ++c) row.push_back(knn.points(r, c));
      rows.push_back(row);
    }
    j["points"] = rows;
  }
  return j;
}

namespace {

Matrix matrix_from_json(const nlohmann::json& rows, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("learner matrix row has wrong width");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

WeakLearner learner_from_json(const nlohmann::json& j) {
  WeakLearner m;
  m.kind = parse_learner_kind(j.at("kind").get<std::string>());
  m.feature_subset = j.at("subset").get<FeatureSubset>();
  m.classes = j.at("classes").get<int>();
  const auto width = static_cast<Eigen::Index>(m.feature_subset.size());
  switch (m.kind) {
    case LearnerKind::stump:
      m.params = StumpParams{j.at("axis").get<Eigen::Index>(), j.at("threshold").get<double>(),
                             j.at("left_class").get<int>(), j.at("right_class").get<int>()};
      break;
    case LearnerKind::logistic:
      m.params = LogisticParams{matrix_from_json(j.at("weights"), width + 1)};
      break;
    case LearnerKind::knn:
      m.params = KnnParams{matrix_from_json(j.at("points"), width), j.at("labels").get<std::vector<int>>(),
                           j.at("k").get<int>()};
      break;
  }
  return m;
}

}  // namespace autows
