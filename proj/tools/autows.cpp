// Command-line front end: ingest, run, sweep, profile, serve, replay.
// Exit status: 0 success, 2 method not applicable, 1 error.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "autows/bench.hpp"
#include "autows/csv.hpp"
#include "autows/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace autows;
using namespace autows::bench;

namespace {

constexpr int kExitNotApplicable = 2;

// Raw flag values; only flags that were given override the config file.
struct RunFlags {
  std::string config_file;
  std::string manifest;
  std::string provenance;
  std::vector<std::string> extra_provenances;
  bool standardize = false;
  std::string method;
  std::string label_model;
  int cardinality = 1;
  std::size_t max_candidates = 0;
  std::vector<std::string> kinds;
  std::string selection_metric;
  std::string threshold_metric;
  int max_lfs_per_class = 0;
  std::string fill;
  double accuracy_threshold = 0.0;
  std::size_t min_pool = 0;
  std::string cluster_method;
  std::size_t label_budget = 0;
  bool external_votes = false;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_file, "JSON run configuration");
    opts["manifest"] = app->add_option("--manifest", manifest, "dataset manifest");
    opts["provenance"] = app->add_option("--provenance", provenance, "feature provenance");
    opts["extra"] = app->add_option("--extra-provenance", extra_provenances, "additional GOGGLES views");
    opts["standardize"] = app->add_flag("--standardize", standardize, "z-score features using train statistics");
    opts["method"] = app->add_option("--method", method,
                                     "snuba_unipolar|snuba_multipolar|iws_auto|iws_interactive|goggles|"
                                     "few_shot|label_prop|zero_shot");
    opts["label_model"] = app->add_option("--label-model", label_model, "majority|dawid_skene");
    opts["cardinality"] = app->add_option("--cardinality", cardinality, "features per candidate LF");
    opts["max_candidates"] = app->add_option("--max-candidates", max_candidates);
    opts["kinds"] = app->add_option("--kinds", kinds, "learner kinds: stump logistic knn");
    opts["selection"] = app->add_option("--selection-metric", selection_metric, "metric id or weights JSON");
    opts["threshold"] = app->add_option("--threshold-metric", threshold_metric, "metric id or weights JSON");
    opts["max_lfs"] = app->add_option("--max-lfs-per-class", max_lfs_per_class);
    opts["fill"] = app->add_option("--fill", fill, "none|prior_sample|majority_class");
    opts["acc"] = app->add_option("--accuracy-threshold", accuracy_threshold, "IWS usefulness threshold");
    opts["min_pool"] = app->add_option("--min-pool", min_pool);
    opts["cluster"] = app->add_option("--cluster-method", cluster_method, "gmm|kmeans|spectral");
    opts["budget"] = app->add_option("--label-budget", label_budget, "labeled examples to keep (0 = all)");
    opts["external"] = app->add_flag("--external-votes", external_votes, "merge the manifest's external votes");
    opts["seed"] = app->add_option("--seed", seed);
    opts["output"] = app->add_option("--output-dir", output_dir);
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  static MetricWeights weights(const std::string& text) {
    if (!text.empty() && text.front() == '{') return metric_weights_from_json(json::parse(text));
    return MetricWeights::one_hot(parse_metric(text));
  }

  RunConfig build() const {
    RunConfig c;
    if (given("config")) {
      std::ifstream in(config_file);
      if (!in) throw Error("cannot open config: " + config_file);
      c = run_config_from_json(json::parse(in), fs::path(config_file).parent_path());
    }
    if (given("manifest")) c.manifest = manifest;
    if (given("provenance")) c.provenance = provenance;
    if (given("extra")) c.extra_provenances = extra_provenances;
    if (given("standardize")) c.standardize = standardize;
    if (given("method")) c.method = parse_method(method);
    if (given("label_model")) c.label_model = parse_label_model(label_model);
    if (given("cardinality")) c.synthesis.cardinality = cardinality;
    if (given("max_candidates")) c.synthesis.max_candidates = max_candidates;
    if (given("kinds")) {
      c.synthesis.kinds.clear();
      for (const auto& k : kinds) c.synthesis.kinds.push_back(parse_learner_kind(k));
    }
    if (given("selection")) c.synthesis.selection_weights = weights(selection_metric);
    if (given("threshold")) c.synthesis.threshold_weights = weights(threshold_metric);
    if (given("max_lfs")) c.synthesis.max_lfs_per_class = max_lfs_per_class;
    if (given("fill")) c.fill = parse_fill_policy(fill);
    if (given("acc")) c.accuracy_threshold = accuracy_threshold;
    if (given("min_pool")) c.min_pool = min_pool;
    if (given("cluster")) c.cluster_method = parse_cluster_method(cluster_method);
    if (given("budget")) c.label_budget = label_budget;
    if (given("external")) c.use_external_votes = external_votes;
    if (given("seed")) c.seed = seed;
    if (given("output")) c.output_dir = output_dir;
    if (c.manifest.empty()) throw Error("a manifest is required (--manifest or --config)");
    return c;
  }
};

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_ingest(const std::string& manifest, const std::string& provenance, int pca, bool standardize,
               int bitrev_side, std::string out_manifest) {
  const fs::path in_path(manifest);
  std::ifstream in(in_path);
  if (!in) throw Error("cannot open manifest: " + manifest);
  json m = json::parse(in);
  DatasetBundle bundle = load_bundle(in_path, LoadOptions{provenance, false});
  json summary = {{"name", bundle.name},
                  {"classes", bundle.classes()},
                  {"provenances", manifest_provenances(in_path)},
                  {"train_rows", bundle.train_features.rows()},
                  {"val_rows", bundle.val_features.rows()},
                  {"features", bundle.train_features.cols()}};
  if (bundle.test_features) summary["test_rows"] = bundle.test_features->rows();

  const bool transform = pca > 0 || standardize || bitrev_side > 0;
  if (!transform) {
    std::cout << summary.dump(2) << '\n';
    return 0;
  }
  if (out_manifest.empty()) out_manifest = manifest;
  const fs::path out_path(out_manifest);
  const fs::path out_dir = out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path();
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, FeatureMatrix*>> splits{{"train", &bundle.train_features},
                                                            {"val", &bundle.val_features}};
  if (bundle.test_features) splits.emplace_back("test", &*bundle.test_features);

  std::optional<Standardizer> scaler;
  if (standardize) scaler = fit_standardizer(bundle.train_features);
  std::optional<PcaModel> model;
  if (pca > 0) {
    model = fit_pca(scaler ? apply_standardizer(*scaler, bundle.train_features) : bundle.train_features, pca);
  }
  std::string new_prov;
  for (auto& [split, features] : splits) {
    FeatureMatrix f = *features;
    if (bitrev_side > 0) f = bit_reversal_permute(f, bitrev_side);
    if (scaler) f = apply_standardizer(*scaler, f);
    if (model) f = apply_pca(*model, f);
    new_prov = f.provenance();
    const std::string file = bundle.name + "." + split + "." + new_prov + ".csv";
    csv::write_real_matrix(out_dir / file, f.values());
    m["splits"][split]["features"][new_prov] = file;
  }
  // Every other relative path must still resolve from the output location.
  const fs::path in_dir = fs::weakly_canonical(fs::absolute(in_path)).parent_path();
  if (fs::weakly_canonical(fs::absolute(out_dir)) != in_dir) {
    for (auto& [split, entry] : m["splits"].items()) {
      for (auto& [prov, file] : entry["features"].items()) {
        if (prov != new_prov && fs::path(file.get<std::string>()).is_relative()) {
          file = (in_dir / file.get<std::string>()).string();
        }
      }
      if (entry.contains("labels") && fs::path(entry["labels"].get<std::string>()).is_relative()) {
        entry["labels"] = (in_dir / entry["labels"].get<std::string>()).string();
      }
    }
    if (m.contains("external_votes") && fs::path(m["external_votes"].get<std::string>()).is_relative()) {
      m["external_votes"] = (in_dir / m["external_votes"].get<std::string>()).string();
    }
  }
  write_json_file(out_path, m);
  load_bundle(out_path, LoadOptions{new_prov, false});
  summary["added_provenance"] = new_prov;
  summary["manifest"] = out_path.string();
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_run(const RunConfig& config) {
  const RunReport report = run(config);
  json j = to_json(report);
  j["run_dir"] = report.run_dir.string();
  j["from_cache"] = report.from_cache;
  j["seconds"] = report.seconds;
  std::cout << j.dump(2) << '\n';
  return report.applicable() ? 0 : kExitNotApplicable;
}

int cmd_sweep(const RunConfig& base, SweepSpec spec, const std::vector<std::string>& cluster_methods) {
  for (const auto& m : cluster_methods) spec.cluster_methods.push_back(parse_cluster_method(m));
  const SweepResult result = sweep(base, spec);
  const std::string tag = std::string(to_string(spec.axis)) + "-" + cache_key(base).substr(0, 12);
  const fs::path dir = base.output_dir / "sweeps" / tag;
  fs::create_directories(dir);
  write_objective_table(dir / "error_table.csv", result.error_table);
  write_objective_table(dir / "coverage_table.csv", result.coverage_table);
  json points = json::array();
  bool any_applicable = false;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const RunReport& r = result.reports[i];
    any_applicable = any_applicable || r.applicable();
    json p = to_json(r);
    p["label"] = result.points[i].label;
    p["run_dir"] = r.run_dir.string();
    points.push_back(std::move(p));
  }
  write_json_file(dir / "points.json", points);
  std::cout << json{{"sweep_dir", dir.string()}, {"points", points.size()}}.dump(2) << '\n';
  return any_applicable ? 0 : kExitNotApplicable;
}

int cmd_profile(const std::string& table, const std::string& kind, const std::string& out_dir) {
  const ObjectiveKind k = parse_objective_kind(kind);
  const ObjectiveTable t = read_objective_table(table, k);
  const auto curves = performance_profile(t);
  fs::create_directories(out_dir);
  write_profile_csv(fs::path(out_dir) / "profile.csv", curves);
  write_json_file(fs::path(out_dir) / "profile.json", profile_plot_json(curves, k));
  std::cout << json{{"profile_csv", (fs::path(out_dir) / "profile.csv").string()},
                    {"profile_json", (fs::path(out_dir) / "profile.json").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_serve(const RunConfig& config, ServeOptions options) {
  if (const char* token = std::getenv(kTokenEnv); token && *token) options.token = token;
  SessionServer server(config, options);
  const int port = server.bind();
  std::cerr << "serving on http://" << options.host << ":" << port << (options.token ? " (token required)" : "")
            << '\n';
  server.listen();
  return 0;
}

int cmd_replay(RunConfig config, const std::string& log, const std::string& out) {
  DatasetBundle bundle = load_bundle(config.manifest, LoadOptions{config.provenance, config.standardize});
  if (config.label_budget > 0) bundle = with_label_budget(bundle, config.label_budget);
  config.synthesis.seed = config.seed;
  LFSet pool = build_pool(bundle, config.synthesis, config.min_pool);
  const double t = config.accuracy_threshold.value_or(default_accuracy_threshold(bundle.classes()));
  const SelectionResult result =
      replay(Session::create(std::move(pool), bundle, SessionMode::interactive, t), read_verdict_log(log));
  save_lfset(out, result.selected);
  json ids = json::array();
  for (const auto& lf : result.selected.lfs) ids.push_back(lf.id);
  std::cout << json{{"lf_set_path", out}, {"selected", ids.size()}, {"empty_warning", result.empty_warning},
                    {"lf_ids", ids}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"autows: automated weak supervision benchmark"};
  app.require_subcommand(1);

  std::string ingest_manifest, ingest_prov, ingest_out;
  int ingest_pca = 0, ingest_bitrev = 0;
  bool ingest_std = false;
  auto* ingest = app.add_subcommand("ingest", "validate a manifest and optionally add a derived representation");
  ingest->add_option("manifest", ingest_manifest)->required();
  ingest->add_option("--provenance", ingest_prov, "source provenance");
  ingest->add_option("--pca", ingest_pca, "project onto the top-k principal components");
  ingest->add_flag("--standardize", ingest_std, "z-score using train statistics");
  ingest->add_option("--bit-reversal", ingest_bitrev, "bit-reversal permute square images of this side");
  ingest->add_option("--out", ingest_out, "manifest to write (default: update in place)");

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run one method on one dataset");
  run_flags.add(run_cmd);

  RunFlags sweep_flags;
  SweepSpec spec;
  std::string axis = "cardinality";
  std::vector<std::string> sweep_clusters;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep and emit objective tables");
  sweep_flags.add(sweep_cmd);
  sweep_cmd->add_option("--axis", axis, "cardinality|label_budget|metric_weights|iws_threshold|goggles_method");
  sweep_cmd->add_option("--values", spec.values, "grid values (default grid when omitted)");
  sweep_cmd->add_option("--draws", spec.draws, "metric weight draws");
  sweep_cmd->add_option("--cluster-methods", sweep_clusters);
  sweep_cmd->add_option("--workers", spec.workers, "parallel runs (0 = hardware threads)");

  std::string table, kind = "classification_error", profile_out = "autows_out/profile";
  auto* profile = app.add_subcommand("profile", "performance profile of an objective table");
  profile->add_option("table", table)->required();
  profile->add_option("--kind", kind, "classification_error|one_minus_coverage");
  profile->add_option("--out-dir", profile_out);

  RunFlags serve_flags;
  ServeOptions serve_opts;
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "interactive LF vetting service");
  serve_flags.add(serve);
  serve->add_option("--host", serve_opts.host);
  serve->add_option("--port", serve_opts.port);
  serve->add_option("--static-dir", static_dir, "UI bundle to serve at /");

  RunFlags replay_flags;
  std::string log, replay_out = "lfset.json";
  auto* replay_cmd = app.add_subcommand("replay", "rebuild an LF set from a recorded verdict log");
  replay_flags.add(replay_cmd);
  replay_cmd->add_option("--log", log, "verdicts.ndjson")->required();
  replay_cmd->add_option("--out", replay_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_manifest, ingest_prov, ingest_pca, ingest_std, ingest_bitrev, ingest_out);
    if (*run_cmd) return cmd_run(run_flags.build());
    if (*sweep_cmd) {
      spec.axis = parse_sweep_axis(axis);
      return cmd_sweep(sweep_flags.build(), spec, sweep_clusters);
    }
    if (*profile) return cmd_profile(table, kind, profile_out);
    if (*serve) {
      serve_opts.static_dir = static_dir;
      return cmd_serve(serve_flags.build(), serve_opts);
    }
    if (*replay_cmd) return cmd_replay(replay_flags.build(), log, replay_out);
  } catch (const IncompatibleError& e) {
    std::cerr << "n/a (" << e.code() << "): " << e.what() << '\n';
    return kExitNotApplicable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
