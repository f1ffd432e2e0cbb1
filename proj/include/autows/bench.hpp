#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autows/baselines.hpp"
#include "autows/goggles_engine.hpp"
#include "autows/iws_engine.hpp"
#include "autows/label_model.hpp"
#include "autows/lf_engine.hpp"
#include "autows/profiles.hpp"

namespace autows::bench {

enum class Method {
  snuba_unipolar,
  snuba_multipolar,
  iws_auto,
  iws_interactive,
  goggles,
  few_shot,
  label_prop,
  zero_shot,
};

enum class LabelModelKind { majority, dawid_skene };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
std::string_view to_string(LabelModelKind k);
LabelModelKind parse_label_model(std::string_view name);

struct RunConfig {
  std::filesystem::path manifest;
  std::string provenance;  // empty: manifest default
  std::vector<std::string> extra_provenances;  // additional goggles views
  bool standardize = false;
  Method method = Method::snuba_unipolar;
  LabelModelKind label_model = LabelModelKind::dawid_skene;
  SynthesisConfig synthesis;
  DawidSkeneOptions dawid_skene;
  FillPolicy fill = FillPolicy::none;
  std::optional<double> accuracy_threshold;  // iws; default max(0.5, 1/C) + 0.1
  std::size_t min_pool = kDefaultMinPool;
  ClusterMethod cluster_method = ClusterMethod::gmm;
  PropagationOptions propagation;
  LogisticOptions few_shot;
  std::size_t label_budget = 0;  // 0 keeps every labeled example
  bool use_external_votes = false;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "autows_out";
};

// Everything except output_dir, with the run seed propagated into nested configs.
nlohmann::json canonical_json(const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);
// Unset keys keep their defaults; relative manifest paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct RunReport {
  std::string status;  // "ok", "warning:empty_lfset", or "n/a:<reason>"
  std::string message;
  std::string method;
  std::string dataset;
  std::string provenance;
  std::string evaluation_split;  // "test", "train" or "none"
  std::optional<double> accuracy_covered;
  std::optional<double> accuracy_all_with_fill;
  double coverage = 0.0;
  std::size_t num_lfs = 0;
  std::size_t label_budget = 0;
  std::map<std::string, std::string> artifacts;  // name -> path relative to run_dir
  std::string cache_key;
  std::filesystem::path run_dir;
  // Not persisted: they differ between otherwise identical runs.
  bool from_cache = false;
  double seconds = 0.0;

  bool applicable() const { return status.rfind("n/a", 0) != 0; }
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

// SHA-256 over the canonical config and the bytes of the manifest and every
// file it references.
std::string cache_key(const RunConfig& config);
std::string sha256_hex(std::string_view data);

// Runs the configured pipeline end to end. Results are cached under
// output_dir/runs/<key>; a repeated call returns the stored report. An
// incompatible method/representation pair yields an "n/a:<reason>" report.
RunReport run(const RunConfig& config);

enum class SweepAxis { cardinality, label_budget, metric_weights, iws_threshold, goggles_method };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepSpec {
  SweepAxis axis = SweepAxis::cardinality;
  std::vector<double> values;  // cardinality, budget or threshold grid; empty = default grid
  std::size_t draws = 10;  // metric_weights
  std::vector<ClusterMethod> cluster_methods;  // goggles_method; empty = all three
  std::size_t workers = 0;  // 0 = hardware concurrency
};

struct SweepPoint {
  std::string label;
  RunConfig config;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<RunReport> reports;
  ObjectiveTable error_table;     // 1 - accuracy_covered
  ObjectiveTable coverage_table;  // 1 - coverage
};

std::vector<double> default_sweep_values(SweepAxis axis);
// Expands the grid and checks every point before anything runs.
std::vector<SweepPoint> plan_sweep(const RunConfig& base, const SweepSpec& spec);
SweepResult sweep(const RunConfig& base, const SweepSpec& spec);

inline constexpr const char* kTokenEnv = "AUTOWS_TOKEN";
inline constexpr const char* kTokenHeader = "X-Autows-Token";

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  std::optional<std::string> token;  // required on every request when set
  std::filesystem::path static_dir;  // UI bundle; empty = none
};

// JSON-over-HTTP vetting service. The candidate pool is built once from the
// config's bundle; each POST /sessions opens an independent interactive
// session over it. Verdicts are appended to
// output_dir/sessions/<id>/verdicts.ndjson as they arrive.
class SessionServer {
 public:
  SessionServer(const RunConfig& config, ServeOptions options);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  // Binds the socket and returns the port; throws Error("port busy: ...").
  int bind();
  // Serves until stop(); bind() must have succeeded.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace autows::bench
