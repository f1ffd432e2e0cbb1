#include <doctest.h>

#include <cmath>
#include <set>

#include "autows/error.hpp"
#include "autows/metrics.hpp"
#include "autows/random.hpp"

using namespace autows;

namespace {

struct Oracle {
  std::vector<int> g, p;
  int classes;

  double count(int gold, int pred) const {
    double n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) n += g[i] == gold && p[i] == pred;
    return n;
  }
  double tp(int c) const { return count(c, c); }
  double fp(int c) const {
    double n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) n += p[i] == c && g[i] != c;
    return n;
  }
  double fn(int c) const {
    double n = 0;
    for (std::size_t i = 0; i < g.size(); ++i) n += g[i] == c && p[i] != c;
    return n;
  }
  std::vector<int> present() const {
    std::set<int> s(g.begin(), g.end());
    s.insert(p.begin(), p.end());
    return {s.begin(), s.end()};
  }
  double accuracy() const {
    double n = 0;
    for (int c = 0; c < classes; ++c) n += tp(c);
    return n / static_cast<double>(g.size());
  }
  double macro(double (Oracle::*per)(int) const) const {
    double s = 0;
    for (int c : present()) s += (this->*per)(c);
    return s / static_cast<double>(present().size());
  }
  double prec(int c) const { return tp(c) + fp(c) ? tp(c) / (tp(c) + fp(c)) : 0; }
  double rec(int c) const { return tp(c) + fn(c) ? tp(c) / (tp(c) + fn(c)) : 0; }
  double jac(int c) const { return tp(c) + fp(c) + fn(c) ? tp(c) / (tp(c) + fp(c) + fn(c)) : 0; }
  double f1(int c) const { return prec(c) + rec(c) ? 2 * prec(c) * rec(c) / (prec(c) + rec(c)) : 0; }
  double weighted_f1() const {
    double s = 0;
    for (int c = 0; c < classes; ++c) s += (tp(c) + fn(c)) * f1(c);
    return s / static_cast<double>(g.size());
  }
  double balanced() const {
    double s = 0;
    int k = 0;
    for (int c = 0; c < classes; ++c) {
      if (tp(c) + fn(c) == 0) continue;
      s += rec(c);
      ++k;
    }
    return s / k;
  }
  double kappa() const {
    const double n = static_cast<double>(g.size());
    double pe = 0;
    for (int c = 0; c < classes; ++c) pe += ((tp(c) + fn(c)) / n) * ((tp(c) + fp(c)) / n);
    return (accuracy() - pe) / (1 - pe);
  }
  // Pearson correlation between the one-hot indicator matrices.
  double mcc() const {
    const double n = static_cast<double>(g.size());
    double cov_gp = 0, cov_gg = 0, cov_pp = 0;
    for (int c = 0; c < classes; ++c) {
      const double mg = (tp(c) + fn(c)) / n, mp = (tp(c) + fp(c)) / n;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = (g[i] == c) - mg, b = (p[i] == c) - mp;
        cov_gp += a * b;
        cov_gg += a * a;
        cov_pp += b * b;
      }
    }
    return cov_gp / std::sqrt(cov_gg * cov_pp);
  }
};

}  // namespace

TEST_CASE("perfect predictions score 1 on every metric") {
  const std::vector<int> g{0, 1, 2, 1, 0};
  for (Metric m : kAllMetrics) CHECK(score(m, g, g, {}, 3) == doctest::Approx(1.0));
  const std::vector<int> single{1, 1, 1};
  CHECK(score(Metric::cohen_kappa, single, single, {}, 2) == 0.0);
  CHECK(score(Metric::matthews, single, single, {}, 2) == 0.0);
  CHECK(score(Metric::accuracy, single, single, {}, 2) == 1.0);
}

TEST_CASE("constant predictions on balanced binary gold are at chance") {
  const std::vector<int> g{0, 1, 0, 1, 0, 1};
  const std::vector<int> p(6, 1);
  CHECK(score(Metric::accuracy, p, g, {}, 2) == 0.5);
  CHECK(score(Metric::cohen_kappa, p, g, {}, 2) == 0.0);
  CHECK(score(Metric::matthews, p, g, {}, 2) == 0.0);
}

TEST_CASE("twelve-point multiclass instance matches confusion oracle") {
  const Oracle o{{0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2}, {0, 0, 1, 2, 0, 1, 1, 0, 2, 2, 2, 1}, 3};
  auto s = [&](Metric m) { return score(m, o.p, o.g, {}, 3); };
  CHECK(std::abs(s(Metric::accuracy) - o.accuracy()) < 1e-9);
  CHECK(std::abs(s(Metric::micro_f1) - o.accuracy()) < 1e-9);
  CHECK(std::abs(s(Metric::weighted_f1) - o.weighted_f1()) < 1e-9);
  CHECK(std::abs(s(Metric::balanced_accuracy) - o.balanced()) < 1e-9);
  CHECK(std::abs(s(Metric::precision) - o.macro(&Oracle::prec)) < 1e-9);
  CHECK(std::abs(s(Metric::recall) - o.macro(&Oracle::rec)) < 1e-9);
  CHECK(std::abs(s(Metric::jaccard) - o.macro(&Oracle::jac)) < 1e-9);
  CHECK(std::abs(s(Metric::cohen_kappa) - o.kappa()) < 1e-9);
  CHECK(std::abs(s(Metric::matthews) - o.mcc()) < 1e-9);
}

TEST_CASE("random instances match the oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(3));
    Oracle o{{}, {}, classes};
    for (int i = 0; i < 30; ++i) {
      o.g.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
      o.p.push_back(rng.uniform() < 0.6 ? o.g.back() : static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    }
    CHECK(std::abs(score(Metric::matthews, o.p, o.g, {}, classes) - o.mcc()) < 1e-9);
    CHECK(std::abs(score(Metric::weighted_f1, o.p, o.g, {}, classes) - o.weighted_f1()) < 1e-9);
    CHECK(std::abs(score(Metric::jaccard, o.p, o.g, {}, classes) - o.macro(&Oracle::jac)) < 1e-9);
  }
}

TEST_CASE("coverage mask restricts scoring") {
  const std::vector<int> g{0, 1, 1, 0};
  const std::vector<int> p{0, -1, 1, -1};
  const std::vector<char> covered{1, 0, 1, 0};
  CHECK(score(Metric::accuracy, p, g, covered, 2) == 1.0);
  const std::vector<char> none(4, 0);
  CHECK(score(Metric::accuracy, p, g, none, 2) == 0.0);
  CHECK_THROWS_AS(score(Metric::accuracy, p, g, {}, 2), Error);
}

TEST_CASE("metric ids and weights") {
  for (Metric m : kAllMetrics) CHECK(parse_metric(to_string(m)) == m);
  CHECK_THROWS_WITH_AS(parse_metric("auc"), doctest::Contains("unknown metric id"), Error);
  MetricWeights w;
  w.weights.fill(1.0 / 9.0);
  CHECK_NOTHROW(w.validate());
  w.weights[0] = 0.5;
  CHECK_THROWS_AS(w.validate(), Error);

  const std::vector<int> g{0, 1, 1, 0, 1};
  const std::vector<int> p{0, 1, 0, 0, 1};
  MetricWeights half;
  half.weights[static_cast<std::size_t>(Metric::accuracy)] = 0.5;
  half.weights[static_cast<std::size_t>(Metric::recall)] = 0.5;
  CHECK(weighted_score(half, p, g, {}, 2) ==
        doctest::Approx(0.5 * score(Metric::accuracy, p, g, {}, 2) + 0.5 * score(Metric::recall, p, g, {}, 2)));
}

TEST_CASE("pr curve of a separating posterior stays at precision 1") {
  Eigen::MatrixXd post(4, 2);
  post << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9;
  const std::vector<int> gold{0, 0, 1, 1};
  for (const auto& curve : pr_curves(post, gold)) {
    CHECK(curve.back().recall == 1.0);
    for (const auto& pt : curve) CHECK(pt.precision == 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].recall >= curve[i - 1].recall);
  }
}

TEST_CASE("pr curve with one example per class has two points") {
  Eigen::MatrixXd post(2, 2);
  post << 0.6, 0.4, 0.3, 0.7;
  const auto curves = pr_curves(post, std::vector<int>{0, 1});
  for (const auto& c : curves) CHECK(c.size() == 2);
}

TEST_CASE("uninformative posterior has precision near prevalence at full recall") {
  Rng rng(10);
  const int n = 20000;
  Eigen::MatrixXd post(n, 2);
  std::vector<int> gold(n);
  double positives = 0;
  for (int i = 0; i < n; ++i) {
    post(i, 1) = rng.uniform();
    post(i, 0) = 1 - post(i, 1);
    gold[i] = rng.uniform() < 0.3 ? 1 : 0;
    positives += gold[i];
  }
  const auto curve = pr_curves(post, gold)[1];
  CHECK(curve.back().recall == 1.0);
  CHECK(std::abs(curve.back().precision - positives / n) < 0.01);
}
