#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace autows {

enum class ObjectiveKind { classification_error, one_minus_coverage };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(std::string_view name);

// Method x problem objectives, smaller is better. std::nullopt marks an
// inapplicable (method, problem) pair, which is distinct from a zero objective.
struct ObjectiveTable {
  std::vector<std::string> methods;
  std::vector<std::string> problems;
  std::vector<std::vector<std::optional<double>>> values;  // [method][problem]
  ObjectiveKind kind = ObjectiveKind::classification_error;

  void validate() const;
};

inline constexpr double kProfileEpsilon = 1e-9;
inline constexpr double kSentinelTau = std::numeric_limits<double>::infinity();

struct ProfileCurve {
  std::string method;
  std::vector<double> tau;  // increasing; the last entry is the +inf sentinel
  std::vector<double> rho;
};

// 100 log-spaced points in [1, 32].
std::vector<double> default_tau_grid();

// Ratio of each objective to the best applicable objective of its problem.
// A method attaining the minimum gets exactly 1; others divide by
// max(min, kProfileEpsilon); inapplicable cells get +inf. Result is [method][problem].
std::vector<std::vector<double>> performance_ratios(const ObjectiveTable& table);

// rho_s(tau) = |{p : r_{p,s} <= tau}| / |P|. The denominator includes
// problems where s is inapplicable, so n/a cells depress the curve. The grid
// is extended with a sentinel tau = +inf whose rho counts every applicable
// problem (finite ratio) of the method.
std::vector<ProfileCurve> performance_profile(const ObjectiveTable& table,
                                              std::vector<double> tau_grid = default_tau_grid());

void write_objective_table(const std::filesystem::path& path, const ObjectiveTable& table);
ObjectiveTable read_objective_table(const std::filesystem::path& path,
                                    ObjectiveKind kind = ObjectiveKind::classification_error);

// Long-format CSV: method,tau,rho (tau written as "inf" for the sentinel).
void write_profile_csv(const std::filesystem::path& path, const std::vector<ProfileCurve>& curves);
nlohmann::json profile_plot_json(const std::vector<ProfileCurve>& curves, ObjectiveKind kind);

}  // namespace autows
