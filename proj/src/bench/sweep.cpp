#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "autows/bench.hpp"
#include "autows/csv.hpp"
#include "autows/error.hpp"
#include "autows/random.hpp"

namespace autows::bench {

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::cardinality: return "cardinality";
    case SweepAxis::label_budget: return "label_budget";
    case SweepAxis::metric_weights: return "metric_weights";
    case SweepAxis::iws_threshold: return "iws_threshold";
    case SweepAxis::goggles_method: return "goggles_method";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::cardinality, SweepAxis::label_budget, SweepAxis::metric_weights,
                      SweepAxis::iws_threshold, SweepAxis::goggles_method}) {
    if (to_string(a) == name) return a;
  }
  throw Error("unknown sweep axis: " + std::string(name));
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::cardinality: return {1, 2, 4, 8};
    case SweepAxis::label_budget: {
      std::vector<double> v;
      for (int b = 100; b <= 1000; b += 100) v.push_back(b);
      return v;
    }
    case SweepAxis::iws_threshold: return {0.5, 0.6, 0.7, 0.8, 0.9};
    default: return {};
  }
}

namespace {

bool is_snuba(Method m) { return m == Method::snuba_unipolar || m == Method::snuba_multipolar; }

std::string number_label(double v) {
  if (v == std::floor(v)) return std::to_string(static_cast<long long>(v));
  return csv::format_double(v);
}

std::size_t whole(double v, const char* what, std::size_t i) {
  if (!(v >= 1) || v != std::floor(v)) {
    throw Error(std::string(what) + " must be a positive integer at point " + std::to_string(i));
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<SweepPoint> plan_sweep(const RunConfig& base, const SweepSpec& spec) {
  switch (spec.axis) {
    case SweepAxis::cardinality:
    case SweepAxis::metric_weights:
      if (!is_snuba(base.method)) throw Error("sweep axis " + std::string(to_string(spec.axis)) + " needs a snuba method");
      break;
    case SweepAxis::iws_threshold:
      if (base.method != Method::iws_auto) throw Error("sweep axis iws_threshold needs method iws_auto");
      break;
    case SweepAxis::goggles_method:
      if (base.method != Method::goggles) throw Error("sweep axis goggles_method needs method goggles");
      break;
    case SweepAxis::label_budget:
      if (base.method == Method::iws_interactive) throw Error("iws_interactive cannot be swept");
      break;
  }

  std::vector<double> values = spec.values.empty() ? default_sweep_values(spec.axis) : spec.values;
  std::vector<SweepPoint> points;

  if (spec.axis == SweepAxis::metric_weights) {
    if (spec.draws == 0) throw Error("draws must be positive");
    const auto draws = sample_metric_weights(base.seed, spec.draws);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      SweepPoint p{"draw" + std::to_string(i), base};
      p.config.synthesis.selection_weights = draws[i];
      p.config.synthesis.threshold_weights = draws[i];
      points.push_back(std::move(p));
    }
  } else if (spec.axis == SweepAxis::goggles_method) {
    std::vector<ClusterMethod> methods = spec.cluster_methods;
    if (methods.empty()) methods = {ClusterMethod::gmm, ClusterMethod::kmeans, ClusterMethod::spectral};
    for (ClusterMethod m : methods) {
      SweepPoint p{std::string(to_string(m)), base};
      p.config.cluster_method = m;
      points.push_back(std::move(p));
    }
  } else {
    if (values.empty()) throw Error("sweep grid is empty");
    std::size_t available = 0;
    if (spec.axis == SweepAxis::label_budget) {
      available = load_bundle(base.manifest, LoadOptions{base.provenance, base.standardize}).val_labels.size();
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      SweepPoint p{std::string(to_string(spec.axis)) + "=" + number_label(v), base};
      switch (spec.axis) {
        case SweepAxis::cardinality:
          p.config.synthesis.cardinality = static_cast<int>(whole(v, "cardinality", i));
          break;
        case SweepAxis::label_budget: {
          const std::size_t b = whole(v, "label budget", i);
          if (b > available) {
            throw Error("budget exceeds available labels at point " + std::to_string(i) + " (" +
                        std::to_string(b) + " > " + std::to_string(available) + ")");
          }
          p.config.label_budget = b;
          break;
        }
        case SweepAxis::iws_threshold:
          if (!(v >= 0.0 && v <= 1.0)) throw Error("threshold outside [0,1] at point " + std::to_string(i));
          p.config.accuracy_threshold = v;
          break;
        default:
          break;
      }
      points.push_back(std::move(p));
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) points[i].config.seed = derive_seed(base.seed, i);
  return points;
}

SweepResult sweep(const RunConfig& base, const SweepSpec& spec) {
  SweepResult result;
  result.points = plan_sweep(base, spec);
  const std::size_t n = result.points.size();
  result.reports.resize(n);

  // Identical configurations share a cache directory, so each key runs once.
  std::map<std::string, std::size_t> first_by_key;
  std::vector<std::size_t> unique;
  std::vector<std::size_t> source(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [it, inserted] = first_by_key.emplace(cache_key(result.points[i].config), i);
    source[i] = it->second;
    if (inserted) unique.push_back(i);
  }

  std::size_t workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, unique.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < unique.size();) {
      const std::size_t i = unique[j];
      try {
        result.reports[i] = run(result.points[i].config);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < n; ++i) {
    if (source[i] != i) result.reports[i] = result.reports[source[i]];
  }

  const std::string problem = result.reports.empty() ? std::string() : result.reports.front().dataset;
  for (ObjectiveTable* t : {&result.error_table, &result.coverage_table}) {
    t->problems = {problem};
    t->methods.clear();
    t->values.clear();
  }
  result.error_table.kind = ObjectiveKind::classification_error;
  result.coverage_table.kind = ObjectiveKind::one_minus_coverage;
  for (std::size_t i = 0; i < n; ++i) {
    const RunReport& r = result.reports[i];
    result.error_table.methods.push_back(result.points[i].label);
    result.coverage_table.methods.push_back(result.points[i].label);
    std::optional<double> err;
    std::optional<double> cov;
    if (r.applicable()) {
      if (r.accuracy_covered) err = 1.0 - *r.accuracy_covered;
      cov = 1.0 - r.coverage;
    }
    result.error_table.values.push_back({err});
    result.coverage_table.values.push_back({cov});
  }
  return result;
}

}  // namespace autows::bench
