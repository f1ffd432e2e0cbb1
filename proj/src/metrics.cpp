#include "autows/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "autows/error.hpp"

namespace autows {
namespace {

struct Confusion {
  // counts[g][p]
  std::vector<std::vector<double>> counts;
  std::vector<double> gold_totals;
  std::vector<double> pred_totals;
  double total = 0.0;
  double correct = 0.0;
};

Confusion confusion(std::span<const int> predictions, std::span<const int> gold,
                    std::span<const char> covered, int classes) {
  if (predictions.size() != gold.size()) throw Error("predictions and gold differ in length");
  if (!covered.empty() && covered.size() != gold.size()) throw Error("coverage mask has wrong length");
  const auto c = static_cast<std::size_t>(classes);
  Confusion m{std::vector<std::vector<double>>(c, std::vector<double>(c, 0.0)),
              std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!covered.empty() && !covered[i]) continue;
    const int g = gold[i];
    const int p = predictions[i];
    if (g < 0 || g >= classes) throw Error("gold label out of range");
    if (p < 0 || p >= classes) throw Error("covered prediction out of range");
    m.counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] += 1.0;
    m.gold_totals[static_cast<std::size_t>(g)] += 1.0;
    m.pred_totals[static_cast<std::size_t>(p)] += 1.0;
    m.total += 1.0;
    if (g == p) m.correct += 1.0;
  }
  return m;
}

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

double per_class_f1(const Confusion& m, std::size_t k) {
  const double tp = m.counts[k][k];
  return safe_div(2.0 * tp, m.gold_totals[k] + m.pred_totals[k]);
}

template <typename F>
double macro(const Confusion& m, F per_class) {
  double sum = 0.0;
  int present = 0;
  for (std::size_t k = 0; k < m.gold_totals.size(); ++k) {
    if (m.gold_totals[k] == 0.0 && m.pred_totals[k] == 0.0) continue;
    sum += per_class(k);
    ++present;
  }
  return safe_div(sum, present);
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::micro_f1: return "micro_f1";
    case Metric::weighted_f1: return "weighted_f1";
    case Metric::accuracy: return "accuracy";
    case Metric::balanced_accuracy: return "balanced_accuracy";
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::cohen_kappa: return "cohen_kappa";
    case Metric::jaccard: return "jaccard";
    case Metric::matthews: return "matthews";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown metric id: " + std::string(name));
}

double score(Metric metric, std::span<const int> predictions, std::span<const int> gold,
             std::span<const char> covered, int classes) {
  const Confusion m = confusion(predictions, gold, covered, classes);
  if (m.total == 0.0) return 0.0;
  const std::size_t c = static_cast<std::size_t>(classes);

  switch (metric) {
    case Metric::micro_f1:
    case Metric::accuracy:
      return m.correct / m.total;
    case Metric::weighted_f1: {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += m.gold_totals[k] * per_class_f1(m, k);
      return sum / m.total;
    }
    case Metric::balanced_accuracy: {
      double sum = 0.0;
      int present = 0;
      for (std::size_t k = 0; k < c; ++k) {
        if (m.gold_totals[k] == 0.0) continue;
        sum += m.counts[k][k] / m.gold_totals[k];
        ++present;
      }
      return safe_div(sum, present);
    }
    case Metric::precision:
      return macro(m, [&](std::size_t k) { return safe_div(m.counts[k][k], m.pred_totals[k]); });
    case Metric::recall:
      return macro(m, [&](std::size_t k) { return safe_div(m.counts[k][k], m.gold_totals[k]); });
    case Metric::jaccard:
      return macro(m, [&](std::size_t k) {
        const double tp = m.counts[k][k];
        return safe_div(tp, m.gold_totals[k] + m.pred_totals[k] - tp);
      });
    case Metric::cohen_kappa: {
      const double po = m.correct / m.total;
      double pe = 0.0;
      for (std::size_t k = 0; k < c; ++k) pe += (m.gold_totals[k] / m.total) * (m.pred_totals[k] / m.total);
      if (1.0 - pe <= 0.0) return 0.0;
      return (po - pe) / (1.0 - pe);
    }
    case Metric::matthews: {
      const double s = m.total;
      double pt = 0.0, pp = 0.0, tt = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        pt += m.pred_totals[k] * m.gold_totals[k];
        pp += m.pred_totals[k] * m.pred_totals[k];
        tt += m.gold_totals[k] * m.gold_totals[k];
      }
      const double denom = std::sqrt((s * s - pp) * (s * s - tt));
      if (denom == 0.0) return 0.0;
      return (m.correct * s - pt) / denom;
    }
  }
  throw Error("unknown metric");
}

MetricWeights MetricWeights::one_hot(Metric m) {
  MetricWeights w;
  w.weights[static_cast<std::size_t>(m)] = 1.0;
  return w;
}

void MetricWeights::validate() const {
  double sum = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0)) throw Error("metric weights must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) >= 1e-9) throw Error("metric weights must sum to 1");
}

double weighted_score(const MetricWeights& w, std::span<const int> predictions,
                      std::span<const int> gold, std::span<const char> covered, int classes) {
  double total = 0.0;
  for (Metric m : kAllMetrics) {
    if (w[m] == 0.0) continue;
    total += w[m] * score(m, predictions, gold, covered, classes);
  }
  return total;
}

std::vector<std::vector<PrPoint>> pr_curves(const Eigen::MatrixXd& posterior, std::span<const int> gold) {
  if (static_cast<std::size_t>(posterior.rows()) != gold.size()) {
    throw Error("posterior and gold differ in length");
  }
  const Eigen::Index n = posterior.rows();
  std::vector<std::vector<PrPoint>> curves;
  for (Eigen::Index c = 0; c < posterior.cols(); ++c) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return posterior(a, c) > posterior(b, c); });
    double positives = 0.0;
    for (int g : gold) positives += g == c ? 1.0 : 0.0;

    std::vector<PrPoint> points{{0.0, 1.0}};
    double tp = 0.0;
    double predicted = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const Eigen::Index i = order[pos];
      predicted += 1.0;
      if (gold[static_cast<std::size_t>(i)] == c) tp += 1.0;
      const bool last_of_value =
          pos + 1 == order.size() || posterior(order[pos + 1], c) != posterior(i, c);
      if (!last_of_value) continue;
      const double recall = positives == 0.0 ? 0.0 : tp / positives;
      points.push_back({recall, tp / predicted});
      if (positives > 0.0 && tp == positives) break;
    }
    curves.push_back(std::move(points));
  }
  return curves;
}

}  // namespace autows
