#include "autows/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autows/csv.hpp"
#include "autows/error.hpp"

namespace autows {

std::string_view to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::classification_error ? "classification_error" : "one_minus_coverage";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  if (name == "classification_error") return ObjectiveKind::classification_error;
  if (name == "one_minus_coverage") return ObjectiveKind::one_minus_coverage;
  throw Error("unknown objective kind: " + std::string(name));
}

void ObjectiveTable::validate() const {
  if (values.size() != methods.size()) throw Error("objective table row count mismatch");
  for (const auto& row : values) {
    if (row.size() != problems.size()) throw Error("objective table column count mismatch");
    for (const auto& v : row) {
      if (v && (!std::isfinite(*v) || *v < 0.0)) throw Error("objective values must be finite and nonnegative");
    }
  }
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid(100);
  const double top = std::log(32.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = std::exp(top * static_cast<double>(i) / 99.0);
  }
  grid.front() = 1.0;
  grid.back() = 32.0;
  return grid;
}

std::vector<std::vector<double>> performance_ratios(const ObjectiveTable& table) {
  table.validate();
  const std::size_t s_count = table.methods.size();
  const std::size_t p_count = table.problems.size();
  std::vector<std::vector<double>> ratios(s_count, std::vector<double>(p_count, kSentinelTau));
  for (std::size_t p = 0; p < p_count; ++p) {
    std::optional<double> best;
    for (std::size_t s = 0; s < s_count; ++s) {
      const auto& v = table.values[s][p];
      if (v && (!best || *v < *best)) best = v;
    }
    if (!best) throw Error("problem '" + table.problems[p] + "' has no applicable method");
    const double denom = std::max(*best, kProfileEpsilon);
    for (std::size_t s = 0; s < s_count; ++s) {
      const auto& v = table.values[s][p];
      if (!v) continue;
      ratios[s][p] = *v == *best ? 1.0 : *v / denom;
    }
  }
  return ratios;
}

std::vector<ProfileCurve> performance_profile(const ObjectiveTable& table, std::vector<double> tau_grid) {
  if (tau_grid.empty()) throw Error("tau grid must be non-empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] >= 1.0) || !std::isfinite(tau_grid[i]) || (i > 0 && tau_grid[i] <= tau_grid[i - 1])) {
      throw Error("tau grid must be finite, >= 1 and strictly increasing");
    }
  }
  const auto ratios = performance_ratios(table);
  const double problems = static_cast<double>(table.problems.size());

  std::vector<ProfileCurve> curves;
  for (std::size_t s = 0; s < table.methods.size(); ++s) {
    ProfileCurve curve{table.methods[s], tau_grid, {}};
    curve.tau.push_back(kSentinelTau);
    for (double tau : curve.tau) {
      std::size_t hits = 0;
      for (double r : ratios[s]) {
        if (std::isfinite(r) && r <= tau) ++hits;
      }
      curve.rho.push_back(static_cast<double>(hits) / problems);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

void write_objective_table(const std::filesystem::path& path, const ObjectiveTable& table) {
  table.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "method";
  for (const auto& p : table.problems) out << ',' << p;
  out << '\n';
  for (std::size_t s = 0; s < table.methods.size(); ++s) {
    out << table.methods[s];
    for (const auto& v : table.values[s]) out << ',' << (v ? csv::format_double(*v) : std::string("n/a"));
    out << '\n';
  }
}

ObjectiveTable read_objective_table(const std::filesystem::path& path, ObjectiveKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  ObjectiveTable table;
  table.kind = kind;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(ln);
    if (ln == 1) {
      if (fields.empty() || fields[0] != "method") throw Error(where + ": header must start with 'method'");
      for (std::size_t i = 1; i < fields.size(); ++i) table.problems.emplace_back(fields[i]);
      continue;
    }
    if (fields.size() != table.problems.size() + 1) throw Error(where + ": wrong number of columns");
    table.methods.emplace_back(fields[0]);
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i] == "n/a") {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(csv::parse_double(fields[i], where));
      }
    }
    table.values.push_back(std::move(row));
  }
  table.validate();
  return table;
}

void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfileCurve>& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "method,tau,rho\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.tau.size(); ++i) {
      out << c.method << ',' << (std::isinf(c.tau[i]) ? std::string("inf") : csv::format_double(c.tau[i]))
          << ',' << csv::format_double(c.rho[i]) << '\n';
    }
  }
}

nlohmann::json profile_plot_json(const std::vector<ProfileCurve>& curves, ObjectiveKind kind) {
  nlohmann::json j;
  j["objective"] = std::string(to_string(kind));
  j["series"] = nlohmann::json::array();
  for (const auto& c : curves) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < c.tau.size(); ++i) {
      if (std::isinf(c.tau[i])) continue;
      points.push_back({c.tau[i], c.rho[i]});
    }
    j["series"].push_back({{"method", c.method}, {"points", points}, {"rho_at_infinity", c.rho.back()}});
  }
  return j;
}

}  // namespace autows
