#pragma once

#include <vector>

namespace autows::testing {

// Reference EM written against plain nested vectors: majority-vote
// initialization, MAP updates with additive smoothing, abstain as an extra
// outcome, silent LFs ignored, fixed iteration count.
inline std::vector<std::vector<double>> reference_em(const std::vector<std::vector<int>>& votes, int classes, int iters,
                                              double s) {
  const std::size_t n = votes.size();
  const std::size_t k = n ? votes[0].size() : 0;
  const int outcomes = classes + 1;
  std::vector<bool> silent(k, true);
  std::vector<std::size_t> items;
  std::vector<std::vector<double>> t;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> counts(classes, 0.0);
    double total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (votes[i][j] >= 0) {
        counts[votes[i][j]] += 1;
        total += 1;
        silent[j] = false;
      }
    }
    if (total == 0) continue;
    for (auto& c : counts) c /= total;
    items.push_back(i);
    t.push_back(counts);
  }
  auto symbol = [&](std::size_t item, std::size_t j) { return votes[item][j] < 0 ? classes : votes[item][j]; };
  for (int it = 0; it < iters; ++it) {
    std::vector<double> prior(classes, 0.0);
    for (const auto& row : t) {
      for (int c = 0; c < classes; ++c) prior[c] += row[c];
    }
    for (int c = 0; c < classes; ++c) prior[c] = (prior[c] + s) / (static_cast<double>(items.size()) + classes * s);
    std::vector<std::vector<std::vector<double>>> pi(
        k, std::vector<std::vector<double>>(classes, std::vector<double>(outcomes, 0.0)));
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t r = 0; r < items.size(); ++r) {
        for (int c = 0; c < classes; ++c) pi[j][c][symbol(items[r], j)] += t[r][c];
      }
      for (int c = 0; c < classes; ++c) {
        double row = 0;
        for (int v = 0; v < outcomes; ++v) row += pi[j][c][v];
        for (int v = 0; v < outcomes; ++v) pi[j][c][v] = (pi[j][c][v] + s) / (row + outcomes * s);
      }
    }
    for (std::size_t r = 0; r < items.size(); ++r) {
      std::vector<double> p(classes);
      double z = 0;
      for (int c = 0; c < classes; ++c) {
        double prod = prior[c];
        for (std::size_t j = 0; j < k; ++j) {
          if (!silent[j]) prod *= pi[j][c][symbol(items[r], j)];
        }
        p[c] = prod;
        z += prod;
      }
      for (int c = 0; c < classes; ++c) t[r][c] = p[c] / z;
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(classes, 0.0));
  for (std::size_t r = 0; r < items.size(); ++r) out[items[r]] = t[r];
  return out;
}

}  // namespace autows::testing
