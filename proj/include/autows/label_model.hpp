#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autows/votes.hpp"

namespace autows {

using Matrix = Eigen::MatrixXd;

// Aggregated weak labels. Uncovered rows have hard = kAbstain and an all-zero
// posterior row.
struct WeakLabelOutput {
  Matrix posterior;
  std::vector<int> hard;
  std::vector<char> covered;
  double coverage = 0.0;

  std::size_t size() const { return hard.size(); }
  void validate() const;
};

// Builds a fully covered output from per-row class distributions (argmax,
// lowest index on ties).
WeakLabelOutput covered_output(Matrix posterior);

// Horizontal concatenation; ids become "primary:<id>" and "external:<id>".
VoteMatrix merge_votes(const VoteMatrix& primary, const VoteMatrix& external);

double coverage(const VoteMatrix& votes);

WeakLabelOutput majority_vote(const VoteMatrix& votes);

struct DawidSkeneOptions {
  int max_iter = 100;
  double tol = 1e-6;
  double smoothing = 0.01;
};

struct DawidSkeneModel {
  Eigen::VectorXd class_prior;
  // Per LF, C x (C + 1): row c = P(vote | true class c), last column = abstain.
  // LFs that never vote carry no information and keep a uniform matrix.
  std::vector<Matrix> confusion;
  int iterations_run = 0;
  // Observed-data log-likelihood of the covered rows plus the log density of
  // the symmetric Dirichlet(1 + smoothing) prior the smoothed M-step maximizes.
  // This is the quantity EM never decreases.
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;
};

struct DawidSkeneResult {
  DawidSkeneModel model;
  WeakLabelOutput output;
};

// EM initialized from majority-vote posteriors. Abstaining is modeled as an
// outcome, so an LF that only ever votes one class still separates classes.
// Only covered rows (at least one non-abstain vote) take part; uncovered rows
// stay uncovered.
DawidSkeneResult dawid_skene_fit(const VoteMatrix& votes, const DawidSkeneOptions& options = {});

enum class FillPolicy { none, prior_sample, majority_class };

std::string_view to_string(FillPolicy p);
FillPolicy parse_fill_policy(std::string_view name);

// Hard labels for every row. Uncovered rows keep kAbstain under `none`, draw
// from the empirical distribution of covered hard labels under `prior_sample`,
// or take its mode under `majority_class`.
std::vector<int> filled_labels(const WeakLabelOutput& output, FillPolicy policy, std::uint64_t seed);

// Accuracy over covered rows (0 when nothing is covered).
double accuracy_covered(const WeakLabelOutput& output, std::span<const int> gold);
// Accuracy over all rows; kAbstain counts as an error.
double accuracy_all(std::span<const int> labels, std::span<const int> gold);

// CSV: "hard,covered,p0,...,p{C-1}" header, one row per example.
void write_weak_labels(const std::filesystem::path& path, const WeakLabelOutput& output);
WeakLabelOutput read_weak_labels(const std::filesystem::path& path);
void write_votes(const std::filesystem::path& path, const VoteMatrix& votes);
nlohmann::json to_json(const DawidSkeneModel& model);

}  // namespace autows
