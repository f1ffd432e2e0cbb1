#include "autows/lf_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>

#include "autows/error.hpp"
#include "autows/random.hpp"

namespace autows {
namespace {

std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.cols(); ++c) {
      if (p(i, c) > p(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// C(n, k), saturating well above any candidate cap.
double binomial(Eigen::Index n, Eigen::Index k) {
  double r = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (r > 1e18) return 1e18;
  }
  return std::round(r);
}

bool next_combination(FeatureSubset& s, Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(s.size());
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    auto& v = s[static_cast<std::size_t>(i)];
    if (v < n - k + i) {
      ++v;
      for (Eigen::Index j = i + 1; j < k; ++j) s[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

std::string subset_label(const FeatureSubset& s) {
  std::string out = "f";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(s[i]);
  }
  return out;
}

std::vector<int> take(std::span<const int> v, const std::vector<Eigen::Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Eigen::Index i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[r]);
  return out;
}

// One synthesis loop over a fixed label view. For unipolar runs `labels` are
// the binarized target-vs-rest labels and `target` the original class.
struct LoopSpec {
  Polarity polarity;
  int target;
  int learner_classes;
  std::vector<int> labels;
  double chance;
  int budget;
};

void run_loop(const LoopSpec& spec, const Matrix& x, const std::vector<CandidateDescriptor>& candidates,
              const SynthesisConfig& config, LFSet& out) {
  const std::size_t m = spec.labels.size();
  // Unipolar loops only ever deactivate target-class points, so they end once
  // no active positive remains.
  const int goal = spec.polarity == Polarity::unipolar ? 1 : kAbstain;
  std::vector<char> active(m, 1);
  const auto remaining = [&] {
    std::size_t count = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (active[i] && (goal == kAbstain || spec.labels[i] == goal)) ++count;
    }
    return count;
  };

  std::vector<Matrix> restricted;
  restricted.reserve(candidates.size());
  for (const auto& c : candidates) restricted.push_back(restrict_columns(x, c.subset));

  for (int round = 1; round <= spec.budget; ++round) {
    if (remaining() == 0) break;
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < m; ++i) {
      if (active[i]) idx.push_back(static_cast<Eigen::Index>(i));
    }
    const std::vector<int> y_active = take(spec.labels, idx);

    std::optional<WeakLearner> best;
    std::size_t best_index = 0;
    double best_score = -1.0;
    std::size_t trained = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      WeakLearner learner;
      try {
        learner = train_candidate(candidates[c], take_rows(restricted[c], idx), y_active, spec.learner_classes, config);
      } catch (const Error&) {
        continue;
      }
      ++trained;
      const std::vector<int> pred = argmax_rows(predict_proba(learner, restricted[c]));
      const double s = weighted_score(config.selection_weights, pred, spec.labels, {}, spec.learner_classes);
      if (s > best_score) {
        best_score = s;
        best_index = c;
        best = std::move(learner);
      }
    }
    if (trained == 0) throw Error("no candidate trainable");
    if (best_score <= spec.chance + config.min_improvement) break;

    const Matrix probas = predict_proba(*best, restricted[best_index]);
    const AbstainFit fit = fit_abstain_margin(probas, spec.labels, config.threshold_weights);

    LabelingFunction lf;
    lf.learner = std::move(*best);
    lf.polarity = spec.polarity;
    lf.target_class = spec.polarity == Polarity::unipolar ? spec.target : kAbstain;
    lf.beta = fit.beta;
    lf.id = (spec.polarity == Polarity::unipolar ? "u" + std::to_string(spec.target) : std::string("m")) + "-r" +
            std::to_string(round) + "-" + candidates[best_index].label();

    std::size_t deactivated = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!active[i]) continue;
      const int v = lf_vote(lf, probas.row(static_cast<Eigen::Index>(i)));
      if (v == kAbstain) continue;
      const int truth = spec.polarity == Polarity::unipolar ? (spec.labels[i] == 1 ? spec.target : kAbstain)
                                                            : spec.labels[i];
      if (v == truth) {
        active[i] = 0;
        ++deactivated;
      }
    }

    out.synthesis_log.push_back(SynthesisLogEntry{static_cast<int>(out.synthesis_log.size()) + 1, lf.target_class,
                                                  trained, lf.id, best_score, lf.beta, deactivated, remaining()});
    out.lfs.push_back(std::move(lf));
    // With nothing deactivated the next round would retrain on identical data
    // and commit the same LF again.
    if (deactivated == 0) break;
  }
}

}  // namespace

std::string_view to_string(Polarity p) { return p == Polarity::unipolar ? "unipolar" : "multipolar"; }

Polarity parse_polarity(std::string_view name) {
  if (name == "unipolar") return Polarity::unipolar;
  if (name == "multipolar") return Polarity::multipolar;
  throw Error("unknown polarity: " + std::string(name));
}

int lf_vote(const LabelingFunction& lf, const Eigen::Ref<const Eigen::RowVectorXd>& proba) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < proba.size(); ++c) {
    if (proba(c) > proba(best)) best = c;
  }
  if (proba(best) < 1.0 / static_cast<double>(proba.size()) + lf.beta) return kAbstain;
  if (lf.polarity == Polarity::unipolar) return best == 1 ? lf.target_class : kAbstain;
  return static_cast<int>(best);
}

std::vector<int> lf_votes(const LabelingFunction& lf, const Matrix& features) {
  const Matrix probas = predict_proba(lf.learner, restrict_columns(features, lf.learner.feature_subset));
  std::vector<int> out(static_cast<std::size_t>(probas.rows()));
  for (Eigen::Index i = 0; i < probas.rows(); ++i) out[static_cast<std::size_t>(i)] = lf_vote(lf, probas.row(i));
  return out;
}

std::string CandidateDescriptor::label() const {
  return std::string(to_string(kind)) + "-" + subset_label(subset);
}

void SynthesisConfig::validate(Eigen::Index feature_width) const {
  if (cardinality < 1) throw Error("cardinality must be at least 1");
  if (cardinality > feature_width) {
    throw Error("cardinality D=" + std::to_string(cardinality) + " exceeds feature width d=" +
                std::to_string(feature_width));
  }
  if (max_candidates < 1) throw Error("max_candidates must be at least 1");
  if (kinds.empty()) throw Error("at least one learner kind is required");
  if (max_lfs_per_class < 1) throw Error("max_lfs_per_class must be at least 1");
  selection_weights.validate();
  threshold_weights.validate();
}

nlohmann::json to_json(const MetricWeights& w) {
  nlohmann::json j = nlohmann::json::object();
  for (Metric m : kAllMetrics) j[std::string(to_string(m))] = w[m];
  return j;
}

MetricWeights metric_weights_from_json(const nlohmann::json& j) {
  MetricWeights w;
  if (j.is_string()) return MetricWeights::one_hot(parse_metric(j.get<std::string>()));
  for (const auto& [key, value] : j.items()) w.weights[static_cast<std::size_t>(parse_metric(key))] = value.get<double>();
  w.validate();
  return w;
}

nlohmann::json to_json(const SynthesisConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.emplace_back(to_string(k));
  return {{"cardinality", c.cardinality},
          {"max_candidates", c.max_candidates},
          {"kinds", kinds},
          {"selection_weights", to_json(c.selection_weights)},
          {"threshold_weights", to_json(c.threshold_weights)},
          {"max_lfs_per_class", c.max_lfs_per_class},
          {"min_improvement", c.min_improvement},
          {"seed", c.seed},
          {"logistic", {{"l2", c.logistic.l2}, {"max_iter", c.logistic.max_iter}, {"tol", c.logistic.tol}}},
          {"knn_k", c.knn_k}};
}

SynthesisConfig synthesis_config_from_json(const nlohmann::json& j) {
  SynthesisConfig c;
  c.cardinality = j.value("cardinality", c.cardinality);
  c.max_candidates = j.value("max_candidates", c.max_candidates);
  if (j.contains("kinds")) {
    c.kinds.clear();
    for (const auto& k : j.at("kinds")) c.kinds.push_back(parse_learner_kind(k.get<std::string>()));
  }
  if (j.contains("selection_weights")) c.selection_weights = metric_weights_from_json(j.at("selection_weights"));
  if (j.contains("threshold_weights")) c.threshold_weights = metric_weights_from_json(j.at("threshold_weights"));
  c.max_lfs_per_class = j.value("max_lfs_per_class", c.max_lfs_per_class);
  c.min_improvement = j.value("min_improvement", c.min_improvement);
  c.seed = j.value("seed", c.seed);
  if (j.contains("logistic")) {
    const auto& l = j.at("logistic");
    c.logistic.l2 = l.value("l2", c.logistic.l2);
    c.logistic.max_iter = l.value("max_iter", c.logistic.max_iter);
    c.logistic.tol = l.value("tol", c.logistic.tol);
  }
  c.knn_k = j.value("knn_k", c.knn_k);
  return c;
}

std::vector<CandidateDescriptor> generate_candidates(Eigen::Index feature_width, const SynthesisConfig& config) {
  config.validate(feature_width);
  const Eigen::Index d = feature_width;
  const Eigen::Index k = config.cardinality;
  const double kinds = static_cast<double>(config.kinds.size());
  const double total = binomial(d, k);

  std::vector<FeatureSubset> subsets;
  if (total * kinds <= static_cast<double>(config.max_candidates)) {
    FeatureSubset s(static_cast<std::size_t>(k));
    std::iota(s.begin(), s.end(), Eigen::Index{0});
    do {
      subsets.push_back(s);
    } while (next_combination(s, d));
  } else {
    const std::size_t want = std::max<std::size_t>(1, config.max_candidates / config.kinds.size());
    std::set<FeatureSubset> chosen;
    Rng rng(config.seed);
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(d));
    while (chosen.size() < want) {
      std::iota(pool.begin(), pool.end(), Eigen::Index{0});
      for (Eigen::Index i = 0; i < k; ++i) {
        const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      }
      FeatureSubset s(pool.begin(), pool.begin() + k);
      std::sort(s.begin(), s.end());
      chosen.insert(std::move(s));
    }
    subsets.assign(chosen.begin(), chosen.end());
  }

  std::vector<CandidateDescriptor> out;
  out.reserve(subsets.size() * config.kinds.size());
  for (const auto& s : subsets) {
    for (LearnerKind kind : config.kinds) out.push_back({kind, s});
  }
  return out;
}

WeakLearner train_candidate(const CandidateDescriptor& candidate, const Matrix& x, std::span<const int> y,
                            int classes, const SynthesisConfig& config) {
  switch (candidate.kind) {
    case LearnerKind::stump:
      return train_stump(x, y, classes, candidate.subset);
    case LearnerKind::logistic:
      return train_logistic(x, y, classes, candidate.subset, config.logistic);
    case LearnerKind::knn:
      return train_knn(x, y, classes, candidate.subset,
                       std::min<int>(config.knn_k, static_cast<int>(x.rows())));
  }
  throw Error("unknown learner kind");
}

std::vector<double> beta_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.05 * i);
  return grid;
}

AbstainFit fit_abstain_margin(const Matrix& probas, std::span<const int> y, const MetricWeights& threshold_weights) {
  if (static_cast<std::size_t>(probas.rows()) != y.size()) throw Error("probabilities and labels differ in length");
  const auto classes = static_cast<int>(probas.cols());
  const std::vector<int> pred = argmax_rows(probas);
  const double floor = 1.0 / static_cast<double>(classes);
  std::vector<char> covered(y.size());

  AbstainFit best{0.0, -1.0};
  for (double beta : beta_grid()) {
    bool any = false;
    for (Eigen::Index i = 0; i < probas.rows(); ++i) {
      const bool votes = !(probas(i, pred[static_cast<std::size_t>(i)]) < floor + beta);
      covered[static_cast<std::size_t>(i)] = votes ? 1 : 0;
      any = any || votes;
    }
    const double s = any ? weighted_score(threshold_weights, pred, y, covered, classes) : 0.0;
    if (s > best.score) best = {beta, s};
  }
  return best;
}

LFSet snuba_synthesize(const DatasetBundle& bundle, const SynthesisConfig& config, Polarity mode) {
  if (bundle.val_labels.size() == 0) throw Error("empty validation labels");
  const Matrix& x = bundle.val_features.values();
  const auto candidates = generate_candidates(x.cols(), config);
  const int classes = bundle.classes();
  const auto& y = bundle.val_labels.values;

  LFSet out;
  out.classes = classes;
  out.config = to_json(config);
  out.config["polarity"] = std::string(to_string(mode));

  if (mode == Polarity::multipolar) {
    run_loop(LoopSpec{mode, kAbstain, classes, y, 1.0 / classes, config.max_lfs_per_class}, x, candidates, config,
             out);
  } else {
    for (int c = 0; c < classes; ++c) {
      std::vector<int> binary(y.size());
      double positives = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        binary[i] = y[i] == c ? 1 : 0;
        positives += binary[i];
      }
      const double prior = positives / static_cast<double>(y.size());
      run_loop(LoopSpec{mode, c, 2, std::move(binary), prior, config.max_lfs_per_class}, x, candidates, config, out);
    }
  }
  return out;
}

std::vector<MetricWeights> sample_metric_weights(std::uint64_t seed, std::size_t count) {
  if (count < 1) throw Error("count must be at least 1");
  Rng rng(seed);
  std::vector<MetricWeights> out(count);
  for (auto& w : out) {
    double sum = 0.0;
    for (double& v : w.weights) {
      v = rng.exponential();
      sum += v;
    }
    for (double& v : w.weights) v /= sum;
  }
  return out;
}

VoteMatrix apply_lfset(const LFSet& lfset, const FeatureMatrix& features) {
  VoteMatrix votes;
  votes.classes = lfset.classes;
  votes.values.resize(features.rows(), static_cast<Eigen::Index>(lfset.lfs.size()));
  for (std::size_t k = 0; k < lfset.lfs.size(); ++k) {
    const auto& lf = lfset.lfs[k];
    for (Eigen::Index s : lf.learner.feature_subset) {
      if (s >= features.cols()) {
        throw Error("dimension mismatch: LF " + lf.id + " uses column " + std::to_string(s) + " of a " +
                    std::to_string(features.cols()) + "-column matrix");
      }
    }
    const auto v = lf_votes(lf, features.values());
    for (std::size_t i = 0; i < v.size(); ++i) votes.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v[i];
    votes.lf_ids.push_back(lf.id);
  }
  return votes;
}

nlohmann::json to_json(const LabelingFunction& lf) {
  return {{"id", lf.id},
          {"polarity", std::string(to_string(lf.polarity))},
          {"target_class", lf.target_class},
          {"beta", lf.beta},
          {"learner", to_json(lf.learner)}};
}

LabelingFunction labeling_function_from_json(const nlohmann::json& j) {
  LabelingFunction lf;
  lf.id = j.at("id").get<std::string>();
  lf.polarity = parse_polarity(j.at("polarity").get<std::string>());
  lf.target_class = j.at("target_class").get<int>();
  lf.beta = j.at("beta").get<double>();
  lf.learner = learner_from_json(j.at("learner"));
  if (lf.beta < 0.0 || lf.beta >= kMaxBeta) throw Error("LF " + lf.id + ": beta out of range");
  return lf;
}

nlohmann::json to_json(const LFSet& set) {
  nlohmann::json lfs = nlohmann::json::array();
  for (const auto& lf : set.lfs) lfs.push_back(to_json(lf));
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : set.synthesis_log) {
    log.push_back({{"iteration", e.iteration},
                   {"target_class", e.target_class},
                   {"candidates", e.candidates},
                   {"chosen_id", e.chosen_id},
                   {"score", e.score},
                   {"beta", e.beta},
                   {"deactivated", e.deactivated},
                   {"active_remaining", e.active_remaining}});
  }
  return {{"classes", set.classes}, {"config", set.config}, {"lfs", lfs}, {"synthesis_log", log}};
}

LFSet lfset_from_json(const nlohmann::json& j) {
  LFSet set;
  set.classes = j.at("classes").get<int>();
  set.config = j.value("config", nlohmann::json::object());
  std::set<std::string> ids;
  for (const auto& lf : j.at("lfs")) {
    set.lfs.push_back(labeling_function_from_json(lf));
    if (!ids.insert(set.lfs.back().id).second) throw Error("duplicate LF id: " + set.lfs.back().id);
  }
  for (const auto& e : j.value("synthesis_log", nlohmann::json::array())) {
    set.synthesis_log.push_back(SynthesisLogEntry{e.at("iteration").get<int>(), e.at("target_class").get<int>(),
                                                  e.at("candidates").get<std::size_t>(), e.at("chosen_id").get<std::string>(),
                                                  e.at("score").get<double>(), e.at("beta").get<double>(),
                                                  e.at("deactivated").get<std::size_t>(),
                                                  e.at("active_remaining").get<std::size_t>()});
  }
  return set;
}

void save_lfset(const std::filesystem::path& path, const LFSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << to_json(set).dump(2) << '\n';
}

LFSet load_lfset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  try {
    return lfset_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace autows
