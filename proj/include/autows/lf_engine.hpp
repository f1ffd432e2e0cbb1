#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "autows/data_model.hpp"
#include "autows/metrics.hpp"
#include "autows/votes.hpp"
#include "autows/weak_learners.hpp"

namespace autows {

enum class Polarity { unipolar, multipolar };

std::string_view to_string(Polarity p);
Polarity parse_polarity(std::string_view name);

// A weak learner plus an abstain rule. The LF votes for the learner's argmax
// class (lowest index on ties) unless its top probability is below
// 1/L + beta, where L is the learner's class count. A unipolar LF wraps a
// binary target-vs-rest learner (class 1 = target) and only ever emits
// `target_class` or kAbstain.
struct LabelingFunction {
  std::string id;
  WeakLearner learner;
  Polarity polarity = Polarity::multipolar;
  int target_class = kAbstain;
  double beta = 0.0;
};

inline constexpr double kMaxBeta = 0.5;

int lf_vote(const LabelingFunction& lf, const Eigen::Ref<const Eigen::RowVectorXd>& proba);
// Votes on every row of a full-width feature matrix.
std::vector<int> lf_votes(const LabelingFunction& lf, const Matrix& features);

struct CandidateDescriptor {
  LearnerKind kind = LearnerKind::stump;
  FeatureSubset subset;

  std::string label() const;
  bool operator==(const CandidateDescriptor&) const = default;
};

struct SynthesisConfig {
  int cardinality = 1;
  std::size_t max_candidates = 1000;
  std::vector<LearnerKind> kinds{LearnerKind::stump, LearnerKind::logistic};
  MetricWeights selection_weights = MetricWeights::one_hot(Metric::micro_f1);
  MetricWeights threshold_weights = MetricWeights::one_hot(Metric::weighted_f1);
  int max_lfs_per_class = 3;
  double min_improvement = 0.02;
  std::uint64_t seed = 0;
  LogisticOptions logistic;
  int knn_k = kDefaultKnnK;

  void validate(Eigen::Index feature_width) const;
};

nlohmann::json to_json(const SynthesisConfig& config);
SynthesisConfig synthesis_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricWeights& w);
MetricWeights metric_weights_from_json(const nlohmann::json& j);

// All C(d, D) subsets in lexicographic order crossed with the learner kinds
// when that fits under max_candidates; otherwise floor(max_candidates / |kinds|)
// distinct subsets drawn uniformly with the run seed, again crossed with kinds.
std::vector<CandidateDescriptor> generate_candidates(Eigen::Index feature_width, const SynthesisConfig& config);

WeakLearner train_candidate(const CandidateDescriptor& candidate, const Matrix& x, std::span<const int> y,
                            int classes, const SynthesisConfig& config);

struct AbstainFit {
  double beta = 0.0;
  double score = 0.0;
};

// Grid search over beta in {0, 0.05, ..., 0.45}; each point is scored on the
// rows that do not abstain. Ties keep the smaller beta.
AbstainFit fit_abstain_margin(const Matrix& probas, std::span<const int> y, const MetricWeights& threshold_weights);
std::vector<double> beta_grid();

struct SynthesisLogEntry {
  int iteration = 0;
  int target_class = kAbstain;  // kAbstain in multipolar mode
  std::size_t candidates = 0;
  std::string chosen_id;
  double score = 0.0;
  double beta = 0.0;
  std::size_t deactivated = 0;
  std::size_t active_remaining = 0;
};

struct LFSet {
  std::vector<LabelingFunction> lfs;
  std::vector<SynthesisLogEntry> synthesis_log;
  int classes = 0;
  nlohmann::json config;  // echo of the producing configuration
};

// Iterative Snuba-style synthesis: train every candidate on the active labeled
// points, commit the best by selection score on the full labeled set, fit its
// abstain margin, deactivate the labeled points it now votes on correctly, and
// repeat until the LF budget is spent, the best score is within min_improvement
// of chance, or no active points remain. Unipolar mode runs one loop per class
// on the target-vs-rest problem.
LFSet snuba_synthesize(const DatasetBundle& bundle, const SynthesisConfig& config, Polarity mode);

// Draws from Dirichlet(1, ..., 1) over the nine metrics.
std::vector<MetricWeights> sample_metric_weights(std::uint64_t seed, std::size_t count);

VoteMatrix apply_lfset(const LFSet& lfset, const FeatureMatrix& features);

nlohmann::json to_json(const LabelingFunction& lf);
LabelingFunction labeling_function_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LFSet& set);
LFSet lfset_from_json(const nlohmann::json& j);
void save_lfset(const std::filesystem::path& path, const LFSet& set);
LFSet load_lfset(const std::filesystem::path& path);

}  // namespace autows
