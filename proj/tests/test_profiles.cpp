#include <doctest.h>

#include <cmath>
#include <fstream>

#include "autows/error.hpp"
#include "autows/profiles.hpp"
#include "autows/random.hpp"
#include "synth.hpp"

using namespace autows;
using namespace autows::testing;

namespace {

ObjectiveTable table(std::vector<std::string> methods, std::vector<std::string> problems,
                     std::vector<std::vector<std::optional<double>>> values) {
  ObjectiveTable t;
  t.methods = std::move(methods);
  t.problems = std::move(problems);
  t.values = std::move(values);
  return t;
}

}  // namespace

TEST_CASE("hand-derived two-by-two profile") {
  const auto t = table({"A", "B"}, {"p1", "p2"}, {{0.2, 0.4}, {0.1, 0.3}});
  const auto r = performance_ratios(t);
  // Ratios by hand: A = (0.2/0.1, 0.4/0.3), B is best everywhere.
  CHECK(r[0][0] == doctest::Approx(2.0));
  CHECK(r[0][1] == doctest::Approx(4.0 / 3.0));
  CHECK(r[1][0] == 1.0);
  CHECK(r[1][1] == 1.0);
  const auto curves = performance_profile(t, {1.0, 1.5, 2.0});
  CHECK(curves[0].rho == std::vector<double>{0.0, 0.5, 1.0, 1.0});
  CHECK(curves[1].rho == std::vector<double>{1.0, 1.0, 1.0, 1.0});
  CHECK(std::isinf(curves[0].tau.back()));
}

TEST_CASE("single method profile is identically one") {
  const auto curves = performance_profile(table({"only"}, {"a", "b", "c"}, {{0.3, 0.0, 0.9}}));
  for (double rho : curves[0].rho) CHECK(rho == 1.0);
}

TEST_CASE("zero best objective uses the epsilon floor") {
  const auto t = table({"zero", "half"}, {"p"}, {{0.0}, {0.5}});
  const auto r = performance_ratios(t);
  CHECK(r[0][0] == 1.0);
  CHECK(r[1][0] == doctest::Approx(0.5 / kProfileEpsilon));
  const auto curves = performance_profile(t);
  for (std::size_t i = 0; i + 1 < curves[1].rho.size(); ++i) CHECK(curves[1].rho[i] == 0.0);
  CHECK(curves[1].rho.back() == 1.0);
}

TEST_CASE("inapplicable cells count in the denominator") {
  const auto t = table({"clip", "snuba"}, {"p1", "p2"}, {{std::nullopt, 0.1}, {0.2, 0.2}});
  const auto curves = performance_profile(t);
  CHECK(curves[0].rho.front() == 0.5);
  CHECK(curves[0].rho.back() == 0.5);
  CHECK_THROWS_WITH_AS(performance_profile(table({"a"}, {"p"}, {{std::nullopt}})),
                       doctest::Contains("no applicable method"), Error);
}

TEST_CASE("random tables: monotone, bounded, someone at one, scale invariant") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t s = 2 + rng.below(4), p = 1 + rng.below(6);
    ObjectiveTable t;
    for (std::size_t i = 0; i < s; ++i) t.methods.push_back("m" + std::to_string(i));
    for (std::size_t j = 0; j < p; ++j) t.problems.push_back("p" + std::to_string(j));
    t.values.assign(s, std::vector<std::optional<double>>(p));
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < p; ++j)
        if (i == 0 || rng.uniform() > 0.2) t.values[i][j] = rng.uniform();
    const auto curves = performance_profile(t);
    double best_at_one = 0;
    for (const auto& c : curves) {
      for (std::size_t k = 1; k < c.rho.size(); ++k) CHECK(c.rho[k] >= c.rho[k - 1]);
      CHECK(c.rho.back() <= 1.0);
      best_at_one = std::max(best_at_one, c.rho.front());
    }
    CHECK(best_at_one >= 1.0 / static_cast<double>(p));

    ObjectiveTable scaled = t;
    for (std::size_t j = 0; j < p; ++j) {
      const double f = std::exp(4 * rng.uniform() - 2);
      for (std::size_t i = 0; i < s; ++i)
        if (scaled.values[i][j]) *scaled.values[i][j] *= f;
    }
    const auto again = performance_profile(scaled);
    for (std::size_t i = 0; i < s; ++i) CHECK(again[i].rho == curves[i].rho);
  }
}

TEST_CASE("default grid and validation") {
  const auto grid = default_tau_grid();
  CHECK(grid.size() == 100);
  CHECK(grid.front() == 1.0);
  CHECK(grid.back() == 32.0);
  CHECK_THROWS_AS(performance_profile(table({"a"}, {"p"}, {{0.1}}), {0.5}), Error);
  CHECK_THROWS_AS(table({"a"}, {"p"}, {{-0.1}}).validate(), Error);
}

TEST_CASE("objective tables and curves round-trip through csv") {
  TempDir dir("profiles");
  const auto t = table({"A", "B"}, {"p1", "p2"}, {{0.25, std::nullopt}, {0.1, 0.3}});
  write_objective_table(dir.path() / "t.csv", t);
  CHECK(read_file(dir.path() / "t.csv") == "method,p1,p2\nA,0.25,n/a\nB,0.1,0.3\n");
  const auto back = read_objective_table(dir.path() / "t.csv");
  CHECK(back.values == t.values);
  CHECK(back.methods == t.methods);

  const auto curves = performance_profile(t, {1.0, 4.0});
  write_profile_csv(dir.path() / "c.csv", curves);
  CHECK(read_file(dir.path() / "c.csv") == "method,tau,rho\nA,1,0\nA,4,0.5\nA,inf,0.5\nB,1,1\nB,4,1\nB,inf,1\n");
  const auto j = profile_plot_json(curves, ObjectiveKind::one_minus_coverage);
  CHECK(j["objective"] == "one_minus_coverage");
  CHECK(j["series"][0]["points"].size() == 2);
  CHECK(j["series"][0]["rho_at_infinity"] == 0.5);
}
