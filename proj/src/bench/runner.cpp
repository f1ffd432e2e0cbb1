#include <chrono>
#include <fstream>

#include "autows/bench.hpp"
#include "autows/error.hpp"
#include "autows/iws_engine.hpp"
#include "autows/random.hpp"

namespace autows::bench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  return json::parse(in);
}

json pr_json(const std::vector<std::vector<PrPoint>>& curves) {
  json out = json::array();
  for (std::size_t c = 0; c < curves.size(); ++c) {
    json points = json::array();
    for (const auto& p : curves[c]) points.push_back({p.recall, p.precision});
    out.push_back({{"class", c}, {"points", points}});
  }
  return out;
}

WeakLabelOutput uncovered_output(Eigen::Index n, int classes) {
  WeakLabelOutput out;
  out.posterior = Matrix::Zero(n, classes);
  out.hard.assign(static_cast<std::size_t>(n), kAbstain);
  out.covered.assign(static_cast<std::size_t>(n), 0);
  out.coverage = 0.0;
  return out;
}

class Pipeline {
 public:
  Pipeline(const RunConfig& config, const fs::path& dir, RunReport& report)
      : config_(config), dir_(dir), report_(report) {}

  void execute() {
    bundle_ = load_bundle(config_.manifest, LoadOptions{config_.provenance, config_.standardize});
    if (config_.label_budget > 0) bundle_ = with_label_budget(bundle_, config_.label_budget);
    report_.dataset = bundle_.name;
    report_.provenance = bundle_.train_features.provenance();
    report_.label_budget = bundle_.val_labels.size();

    if (bundle_.test_features) {
      eval_x_ = &*bundle_.test_features;
      eval_y_ = &*bundle_.test_labels;
      report_.evaluation_split = "test";
    } else {
      eval_x_ = &bundle_.train_features;
      eval_y_ = bundle_.train_labels ? &*bundle_.train_labels : nullptr;
      report_.evaluation_split = eval_y_ ? "train" : "none";
    }

    WeakLabelOutput output;
    switch (config_.method) {
      case Method::snuba_unipolar:
      case Method::snuba_multipolar: {
        SynthesisConfig sc = config_.synthesis;
        sc.seed = config_.seed;
        const Polarity polarity =
            config_.method == Method::snuba_unipolar ? Polarity::unipolar : Polarity::multipolar;
        output = aggregate(snuba_synthesize(bundle_, sc, polarity));
        break;
      }
      case Method::iws_auto: {
        SynthesisConfig sc = config_.synthesis;
        sc.seed = config_.seed;
        LFSet pool = build_pool(bundle_, sc, config_.min_pool);
        const double t = config_.accuracy_threshold.value_or(default_accuracy_threshold(bundle_.classes()));
        Session session = Session::create(std::move(pool), bundle_, SessionMode::automated, t);
        output = aggregate(run_automated(session).selected);
        break;
      }
      case Method::iws_interactive:
        throw Error("iws_interactive runs through the serve subcommand");
      case Method::goggles: {
        std::vector<DatasetBundle> views{transductive(bundle_)};
        for (const auto& prov : config_.extra_provenances) {
          DatasetBundle extra = load_bundle(config_.manifest, LoadOptions{prov, config_.standardize});
          if (config_.label_budget > 0) extra = with_label_budget(extra, config_.label_budget);
          views.push_back(transductive(extra));
        }
        ClusterModel model;
        output = goggles_predict(views, GogglesConfig{config_.cluster_method, config_.seed, {}}, &model);
        artifact("cluster_model", "cluster_model.json", [&](const fs::path& p) { write_json(p, to_json(model)); });
        break;
      }
      case Method::few_shot:
        output = few_shot_logistic(transductive(bundle_), config_.few_shot);
        break;
      case Method::label_prop:
        output = label_propagation(transductive(bundle_), config_.propagation);
        break;
      case Method::zero_shot:
        output = zero_shot_argmax(*eval_x_, bundle_.classes());
        break;
    }

    artifact("weak_labels", "weak_labels.csv", [&](const fs::path& p) { write_weak_labels(p, output); });
    report_.coverage = output.coverage;
    if (eval_y_) {
      report_.accuracy_covered = accuracy_covered(output, eval_y_->values);
      report_.accuracy_all_with_fill =
          accuracy_all(filled_labels(output, config_.fill, derive_seed(config_.seed, 1)), eval_y_->values);

      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < output.size(); ++i) {
        if (output.covered[i]) rows.push_back(static_cast<Eigen::Index>(i));
      }
      Matrix posterior(static_cast<Eigen::Index>(rows.size()), output.posterior.cols());
      std::vector<int> gold;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        posterior.row(static_cast<Eigen::Index>(r)) = output.posterior.row(rows[r]);
        gold.push_back(eval_y_->values[static_cast<std::size_t>(rows[r])]);
      }
      artifact("pr_curves", "pr_curves.json",
               [&](const fs::path& p) { write_json(p, pr_json(pr_curves(posterior, gold))); });
    }
    if (report_.status.empty()) report_.status = "ok";
  }

 private:
  // The transductive methods label whatever sits in the train slot, so the
  // evaluation split takes its place.
  DatasetBundle transductive(const DatasetBundle& b) const {
    DatasetBundle out = b;
    if (b.test_features) {
      out.train_features = *b.test_features;
      out.train_labels = b.test_labels;
      out.test_features.reset();
      out.test_labels.reset();
      out.external_votes.reset();
    }
    return out;
  }

  WeakLabelOutput aggregate(const LFSet& lfset) {
    artifact("lfset", "lfset.json", [&](const fs::path& p) { save_lfset(p, lfset); });
    report_.num_lfs = lfset.lfs.size();
    VoteMatrix votes = apply_lfset(lfset, *eval_x_);
    if (config_.use_external_votes) {
      if (!bundle_.external_votes) throw Error("use_external_votes set but the manifest has no external votes");
      if (eval_x_ != &bundle_.train_features) throw Error("external votes are aligned to the train split only");
      votes = merge_votes(votes, *bundle_.external_votes);
    }
    artifact("votes", "votes.csv", [&](const fs::path& p) { write_votes(p, votes); });
    if (votes.lfs() == 0) {
      report_.status = "warning:empty_lfset";
      report_.message = "no labeling function selected; every point is unlabeled";
      return uncovered_output(votes.rows(), bundle_.classes());
    }
    if (config_.label_model == LabelModelKind::majority) return majority_vote(votes);
    DawidSkeneResult fit = dawid_skene_fit(votes, config_.dawid_skene);
    artifact("label_model", "ds_model.json", [&](const fs::path& p) { write_json(p, to_json(fit.model)); });
    return std::move(fit.output);
  }

  template <typename Writer>
  void artifact(const std::string& name, const std::string& file, Writer write) {
    write(dir_ / file);
    report_.artifacts[name] = file;
  }

  const RunConfig& config_;
  fs::path dir_;
  RunReport& report_;
  DatasetBundle bundle_;
  const FeatureMatrix* eval_x_ = nullptr;
  const LabelVector* eval_y_ = nullptr;
};

}  // namespace

RunReport run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::string key = cache_key(config);
  const fs::path dir = config.output_dir / "runs" / key.substr(0, 16);
  const fs::path report_path = dir / "report.json";

  RunReport report;
  if (fs::exists(report_path)) {
    report = run_report_from_json(read_json(report_path));
    report.run_dir = dir;
    report.from_cache = true;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  }

  fs::create_directories(dir);
  report.method = std::string(to_string(config.method));
  report.cache_key = key;
  report.run_dir = dir;
  report.dataset = config.manifest.stem().string();
  write_json(dir / "config.json", canonical_json(config));
  report.artifacts["config"] = "config.json";
  try {
    Pipeline(config, dir, report).execute();
  } catch (const IncompatibleError& e) {
    report.status = "n/a:" + e.code();
    report.message = e.what();
    report.accuracy_covered.reset();
    report.accuracy_all_with_fill.reset();
    report.coverage = 0.0;
  }
  report.artifacts["report"] = "report.json";
  const fs::path tmp = dir / "report.json.tmp";
  write_json(tmp, to_json(report));
  fs::rename(tmp, report_path);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace autows::bench
