#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace autows {

enum class Metric {
  micro_f1,
  weighted_f1,
  accuracy,
  balanced_accuracy,
  precision,
  recall,
  cohen_kappa,
  jaccard,
  matthews,
};

inline constexpr std::size_t kMetricCount = 9;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::micro_f1,  Metric::weighted_f1, Metric::accuracy,    Metric::balanced_accuracy,
    Metric::precision, Metric::recall,      Metric::cohen_kappa, Metric::jaccard,
    Metric::matthews};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

// Scores predictions against gold on the covered points only. An empty mask
// means every point is covered; an empty covered set scores 0. Precision,
// recall and Jaccard are macro-averaged over the classes that occur in gold
// or predictions; kappa and MCC are 0 when undefined.
double score(Metric metric, std::span<const int> predictions, std::span<const int> gold,
             std::span<const char> covered, int classes);

// Nonnegative weights over the nine metrics summing to one.
struct MetricWeights {
  std::array<double, kMetricCount> weights{};

  static MetricWeights one_hot(Metric m);
  double operator[](Metric m) const { return weights[static_cast<std::size_t>(m)]; }
  void validate() const;
};

double weighted_score(const MetricWeights& w, std::span<const int> predictions,
                      std::span<const int> gold, std::span<const char> covered, int classes);

struct PrPoint {
  double recall;
  double precision;
};

// One curve per class from a threshold sweep over the unique posterior values
// of that class, descending, truncated once full recall is reached and closed
// with the (recall 0, precision 1) endpoint. Points are ordered by increasing
// recall.
std::vector<std::vector<PrPoint>> pr_curves(const Eigen::MatrixXd& posterior, std::span<const int> gold);

}  // namespace autows
